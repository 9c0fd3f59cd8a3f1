from .protocol import PROTOCOL_VERSION, decode_message, encode_message
from .session import Session, SessionStore
from .server import PlayServer

__all__ = [
    "PROTOCOL_VERSION",
    "encode_message",
    "decode_message",
    "Session",
    "SessionStore",
    "PlayServer",
]
