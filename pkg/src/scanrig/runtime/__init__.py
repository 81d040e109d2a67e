from .agent_client import AgentRuntime
from .events import EventBus
from .server import RigHost

__all__ = ["AgentRuntime", "EventBus", "RigHost"]
