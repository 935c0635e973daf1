"""textcomp: compositional word-image synthesis and a rectifying recognizer.

Forward model: transcript -> skeleton -> kerning -> font -> appearance ->
homographic distortion, producing labeled scenes with ground-truth
skeleton templates.  Inverse model: IC-STN rectifier -> conv encoder ->
kerning LSTM -> {template decoder, CTC recognition head}, trained with a
joint CTC + reconstruction objective.
"""

from .backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
