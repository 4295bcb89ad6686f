"""In-process pub/sub with MQTT-flavoured topic matching.

The game server, local daemons and the scoreboard bridge all share one bus
instance per process. Delivery is fan-out: each matching subscription gets
its own copy reference, in publish order. Remote parties get the same data
over TCP frames instead; the bus never crosses process boundaries.
"""

import threading
from collections import deque

from .protocol import Topic, topic_matches


class Subscription:
    """FIFO queue of (topic_path, message) pairs for one subscriber."""

    def __init__(self, pattern: str):
        self.pattern = pattern
        self._items = deque()
        self._cond = threading.Condition()
        self._closed = False

    def _push(self, topic_path: str, message) -> None:
        with self._cond:
            if self._closed:
                return
            self._items.append((topic_path, message))
            self._cond.notify()

    def get(self, timeout: float | None = None):
        """Next item, blocking up to ``timeout``; None when nothing arrived."""
        with self._cond:
            if not self._items:
                self._cond.wait(timeout)
            if not self._items:
                return None
            return self._items.popleft()

    def poll(self):
        with self._cond:
            return self._items.popleft() if self._items else None

    def drain(self) -> list:
        with self._cond:
            items = list(self._items)
            self._items.clear()
            return items

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._items.clear()
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)


class InProcessBus:
    def __init__(self):
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []

    def subscribe(self, pattern: str) -> Subscription:
        """``pattern`` is a topic path; ``+`` matches one level."""
        sub = Subscription(pattern)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            try:
                self._subs.remove(sub)
            except ValueError:
                pass
        sub.close()

    def publish(self, topic, message) -> int:
        """Deliver to every matching subscription; returns delivery count."""
        path = topic.path if isinstance(topic, Topic) else topic
        if "+" in path or "#" in path:
            raise ValueError(f"publish path may not contain wildcards: {path!r}")
        with self._lock:
            targets = [s for s in self._subs if topic_matches(s.pattern, path)]
        for sub in targets:
            sub._push(path, message)
        return len(targets)
