"""QIR base-profile kernels to a 32-bit hybrid ISA, with a simulated control processor."""

from .isa import BinaryProgram, Target, assemble, decode, disassemble, encode, load_image
from .lowering import JobOptions, lower
from .qcp import load, run
from .qir import parse_qir, validate

__version__ = "0.1.0"

__all__ = [
    "BinaryProgram", "JobOptions", "Target", "assemble", "decode", "disassemble", "encode",
    "load", "load_image", "lower", "parse_qir", "run", "validate",
]
