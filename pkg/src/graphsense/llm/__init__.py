from .base import ChatRequest, ChatResponse, Message, Provider
from .codec import RegexCodec, TokenCodec, WhitespaceCodec, get_codec, register_codec
from .gateway import GatewayStats, LLMGateway
from .http import OpenAICompatibleProvider
from .mock import FailingProvider, HashResponder, MockProvider, ScriptRule, hashed_bow_vector

__all__ = [
    "ChatRequest",
    "ChatResponse",
    "FailingProvider",
    "GatewayStats",
    "HashResponder",
    "LLMGateway",
    "Message",
    "MockProvider",
    "OpenAICompatibleProvider",
    "Provider",
    "RegexCodec",
    "ScriptRule",
    "TokenCodec",
    "WhitespaceCodec",
    "get_codec",
    "hashed_bow_vector",
    "register_codec",
]
