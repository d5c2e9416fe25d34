"""
`llm.py` talks to an OpenAI-compatible chat-completion endpoint.

The prompt goes out as a single user message to ``{endpoint}/chat/completions``
and the first choice's message content comes back as raw text. Transient
failures (connection errors, timeouts, rate limits, 5xx) are retried with
exponential backoff; anything left over surfaces as `AdapterTransportError`.
"""
import os
import threading
from typing import Optional

import openai
from dotenv import load_dotenv
from openai import OpenAI
from pydantic import BaseModel, ConfigDict, Field
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

from src.adaptation.adapters import AdapterRequest
from src.core.errors import AdapterConfigurationError, AdapterTransportError
from utils.ml_logging import get_logger

# Load environment variables from .env file
load_dotenv()

logger = get_logger("rebalancing.adaptation")

TRANSIENT_ERRORS = (
    openai.APIConnectionError,
    openai.RateLimitError,
    openai.InternalServerError,
)


class LlmAdapterConfig(BaseModel):
    """
    Connection settings for the live adapter. ``endpoint`` and ``model`` fall
    back to ``LLM_ENDPOINT`` and ``LLM_MODEL``; the credential is read from the
    environment variable named by ``api_key_env``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    endpoint: Optional[str] = None
    model: Optional[str] = None
    temperature: float = Field(0.2, ge=0.0, le=2.0)
    timeout: float = Field(60.0, gt=0.0, description="Seconds per request.")
    max_retries: int = Field(3, ge=0)
    backoff_min: float = Field(1.0, ge=0.0)
    backoff_max: float = Field(20.0, ge=0.0)
    api_key_env: str = "LLM_API_KEY"
    max_in_flight: int = Field(4, ge=1)


class ChatCompletionAdapter:
    """Thread-safe adapter; at most ``max_in_flight`` requests are open at once."""

    def __init__(self, cfg: Optional[LlmAdapterConfig] = None):
        """
        :param cfg: Connection settings.
        :raises AdapterConfigurationError: If the credential, endpoint or model is missing.
        """
        self.cfg = cfg or LlmAdapterConfig()
        api_key = os.getenv(self.cfg.api_key_env)
        if not api_key:
            raise AdapterConfigurationError(
                f"Environment variable {self.cfg.api_key_env} holding the LLM credential is not set"
            )
        self.endpoint = self.cfg.endpoint or os.getenv("LLM_ENDPOINT")
        self.model = self.cfg.model or os.getenv("LLM_MODEL")
        if not self.endpoint or not self.model:
            raise AdapterConfigurationError(
                "LLM endpoint and model must be configured (or set LLM_ENDPOINT and LLM_MODEL)"
            )
        # retries are handled below, not by the client
        self.client = OpenAI(
            api_key=api_key,
            base_url=self.endpoint,
            timeout=self.cfg.timeout,
            max_retries=0,
        )
        self._in_flight = threading.BoundedSemaphore(self.cfg.max_in_flight)
        logger.info(f"LLM adapter ready: model={self.model}, endpoint={self.endpoint}")

    def _complete(self, prompt: str) -> str:
        response = self.client.chat.completions.create(
            model=self.model,
            temperature=self.cfg.temperature,
            messages=[{"role": "user", "content": prompt}],
        )
        return response.choices[0].message.content or ""

    def __call__(self, request: AdapterRequest) -> str:
        logger.debug(f"Prompt for iteration {request.iteration}:\n{request.prompt}")
        retrying = Retrying(
            wait=wait_exponential(multiplier=1, min=self.cfg.backoff_min, max=self.cfg.backoff_max),
            stop=stop_after_attempt(self.cfg.max_retries + 1),
            retry=retry_if_exception_type(TRANSIENT_ERRORS),
            reraise=True,
        )
        with self._in_flight:
            try:
                for attempt in retrying:
                    with attempt:
                        if attempt.retry_state.attempt_number > 1:
                            logger.warning(f"Retrying chat completion (attempt {attempt.retry_state.attempt_number})")
                        return self._complete(request.prompt)
            except openai.OpenAIError as e:
                logger.error(f"Error details: {type(e).__name__}: {e}")
                raise AdapterTransportError(f"Chat completion failed: {type(e).__name__}: {e}") from e
        raise AdapterTransportError("Chat completion returned no result")


def llm_adapter(cfg: Optional[LlmAdapterConfig] = None) -> ChatCompletionAdapter:
    return ChatCompletionAdapter(cfg)
