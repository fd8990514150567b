"""
Structured logging for lab runs.

Console rendering for development and tests, JSON lines for production. Every
entry carries the run identifiers bound by `bind_run_context`.
"""

import logging
import logging.config
import sys
from typing import Any, Dict

import structlog

RUN_CONTEXT_KEYS = ("experiment_id", "config_digest", "seed")

# Third-party loggers held at WARNING regardless of the lab's level
QUIET_LOGGERS = ("joblib", "numexpr")


def _add_run_context(
    logger: Any,
    method_name: str,
    event_dict: Dict[str, Any],
) -> Dict[str, Any]:
    context = structlog.contextvars.get_contextvars()
    for key in RUN_CONTEXT_KEYS:
        if context.get(key) is not None:
            event_dict.setdefault(key, context[key])
    event_dict["service"] = "antipiracy-lab"
    event_dict.setdefault("environment", context.get("environment", "development"))
    return event_dict


def _stdlib_config(log_level: str) -> Dict[str, Any]:
    loggers: Dict[str, Any] = {"": {"handlers": ["stderr"], "level": log_level}}
    loggers.update({name: {"level": "WARNING"} for name in QUIET_LOGGERS})
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {"plain": {"format": "%(message)s"}},
        "handlers": {
            "stderr": {
                "class": "logging.StreamHandler",
                "formatter": "plain",
                "level": log_level,
                "stream": "ext://sys.stderr",
            },
        },
        "loggers": loggers,
    }


def configure_logging(environment: str, log_level: str = "INFO") -> None:
    """
    Configure stdlib logging and structlog once per process.

    Args:
        environment: "production" renders JSON; anything else renders for a console
        log_level: DEBUG, INFO, WARNING, ERROR, CRITICAL
    """
    level = log_level.upper()
    logging.config.dictConfig(_stdlib_config(level))

    renderer = (
        structlog.processors.JSONRenderer()
        if environment == "production"
        else structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            _add_run_context,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.add_log_level,
            structlog.processors.ExceptionRenderer(),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(logging.getLevelName(level)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def bind_run_context(experiment_id: str, config_digest: str, seed: int) -> None:
    """Bind the identifiers every record of a run carries."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(
        experiment_id=experiment_id,
        config_digest=config_digest,
        seed=seed,
    )
