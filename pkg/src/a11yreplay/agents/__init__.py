from .core import (
    MAX_ACTIONS,
    MAX_REPLANS,
    ActionCommand,
    ActionError,
    Agents,
    EvalResult,
    EvaluationResult,
    Plan,
    PlanningError,
    PlanStep,
    StepStatus,
    Stop,
    Swipe,
    Tap,
    TextEntry,
    action_to_dict,
)
from .llm import (
    AgentRole,
    ExchangeLog,
    HTTPClient,
    LLMClient,
    LLMError,
    LLMExchange,
    QueuedResponse,
    Rule,
    ScriptedClient,
    ScriptExhausted,
    llm_complete,
)
from .parsing import ParseError, extract_structured_block

__all__ = [
    "MAX_ACTIONS",
    "MAX_REPLANS",
    "ActionCommand",
    "ActionError",
    "AgentRole",
    "Agents",
    "EvalResult",
    "EvaluationResult",
    "ExchangeLog",
    "HTTPClient",
    "LLMClient",
    "LLMError",
    "LLMExchange",
    "ParseError",
    "Plan",
    "PlanStep",
    "PlanningError",
    "QueuedResponse",
    "Rule",
    "ScriptExhausted",
    "ScriptedClient",
    "StepStatus",
    "Stop",
    "Swipe",
    "Tap",
    "TextEntry",
    "action_to_dict",
    "extract_structured_block",
    "llm_complete",
]
