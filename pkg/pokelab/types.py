from typing import Literal, Tuple, Dict, Any

Point = Tuple[float, float]
ModelTag = Literal["joint", "inverse", "blob"]
TerminalReason = Literal["no-poke", "max-steps", "threshold"]
Selection = Literal["argmax", "sample"]
Study = Literal["planning", "single-poke"]

JSONDict = Dict[str, Any]
