"""Sign-bit protection and content reformation for CNN weights in MLC STT-RAM."""

from .codec import (DomainError, EncodedBuffer, Scheme, SYSTEMS, decode_buffer,
                    encode_buffer, metadata_overhead, select_scheme)
from .halffloat import CellPattern, half_to_real, real_to_half
from .memdevice import CostTable, FaultSpec, charge, default_cost_table, inject_faults

__version__ = "0.1.0"
