"""
Go-style channels for threads.

A channel of capacity 0 is a rendezvous: ``send`` returns only once a
receiver has taken the value. With capacity ``k`` a sender blocks while ``k``
earlier values are still waiting. Closing is an event of its own: once a
closed channel is drained, ``recv`` returns ``CLOSED``.
"""
import threading
from collections import deque
from typing import Any, Iterator, Optional

from .exceptions import ChannelAborted, ProtocolViolation


class _Closed:
    """Marker delivered by ``recv`` once a closed channel is empty."""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return 'CLOSED'

    def __reduce__(self):
        return (_Closed, ())


CLOSED = _Closed()


class Channel:
    def __init__(self, capacity: int = 0, name: str = ''):
        if capacity < 0:
            raise ValueError("channel capacity must be >= 0")
        self.capacity = capacity
        self.name = name
        self._items = deque()
        self._cond = threading.Condition()
        self._sent = 0
        self._received = 0
        self._closed = False
        self._failure: Optional[BaseException] = None

    def _check_abort(self):
        if self._failure is not None:
            raise ChannelAborted(f"channel {self.name} aborted") from self._failure

    def send(self, item: Any) -> None:
        with self._cond:
            self._check_abort()
            if self._closed:
                raise ProtocolViolation(f"send on closed channel {self.name}")
            self._items.append(item)
            self._sent += 1
            ticket = self._sent
            self._cond.notify_all()
            while self._received < ticket - self.capacity:
                self._cond.wait()
                self._check_abort()

    def recv(self) -> Any:
        with self._cond:
            while not self._items:
                self._check_abort()
                if self._closed:
                    return CLOSED
                self._cond.wait()
            self._check_abort()
            item = self._items.popleft()
            self._received += 1
            self._cond.notify_all()
            return item

    def close(self) -> None:
        with self._cond:
            self._check_abort()
            if self._closed:
                raise ProtocolViolation(f"channel {self.name} closed twice")
            self._closed = True
            self._cond.notify_all()

    def abort(self, failure: BaseException) -> None:
        """Wake every blocked sender/receiver with ``ChannelAborted``."""
        with self._cond:
            if self._failure is None:
                self._failure = failure
            self._cond.notify_all()

    @property
    def closed(self) -> bool:
        return self._closed

    def __iter__(self) -> Iterator[Any]:
        while True:
            item = self.recv()
            if item is CLOSED:
                return
            yield item

    def __repr__(self):
        return f"Channel({self.name!r}, capacity={self.capacity})"
