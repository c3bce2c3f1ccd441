from .backends import (
    CachedBackend,
    GeneratorBackend,
    RemoteChatBackend,
    ReplayBackend,
    SyntheticOracleBackend,
    parse_chat_response,
    synthetic_generate,
)
from .cache import ResponseCache, cache_key
from .embed import HashEmbedder, NgramEmbedder, TableEmbedder, cosine_similarity, match_output
from .policy import LLMPolicy, build_distribution
from .types import GeneratorOutput, MatchedDistribution
