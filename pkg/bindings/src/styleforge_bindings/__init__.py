"""Buffer-level bindings over the styleforge engine.

Training loops hand in caller-owned contiguous buffers; the bindings
validate shape/dtype, run the engine, and hand back fresh buffers. One
session equals one serialized stream of restyle calls.
"""

from .errors import SessionClosed, ViewError
from .session import (
    SessionHandle,
    bind_apply_permutation,
    bind_dsm_forward,
    session_close,
    session_open,
    session_snapshot,
)
from .views import BufferView, f32_tensor_view, u8_image_view

__version__ = "0.1.0"
