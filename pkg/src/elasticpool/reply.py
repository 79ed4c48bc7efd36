"""
Lightweight reply handle for invocations and lock requests.

Same surface as the subset of :class:`concurrent.futures.Future` the runtime
uses (``done``, ``result``, ``exception``, ``set_result``, ``set_exception``,
``add_done_callback``), but a simulator creates hundreds of thousands of
these, so the wake-up event is only allocated when a thread actually blocks.
"""

import threading

_state_lock = threading.Lock()
_PENDING = object()


class Reply:
    __slots__ = ("_value", "_error", "_callbacks", "_event")

    def __init__(self):
        self._value = _PENDING
        self._error = None
        self._callbacks = None
        self._event = None

    def done(self):
        return self._value is not _PENDING or self._error is not None

    def _finish(self, value, error):
        with _state_lock:
            if self.done():
                raise RuntimeError("reply already resolved")
            if error is not None:
                self._error = error
            else:
                self._value = value
            callbacks, self._callbacks = self._callbacks, None
            event = self._event
        if event is not None:
            event.set()
        for cb in callbacks or ():
            cb(self)

    def set_result(self, value):
        self._finish(value, None)

    def set_exception(self, error):
        self._finish(None, error)

    def add_done_callback(self, fn):
        with _state_lock:
            if not self.done():
                if self._callbacks is None:
                    self._callbacks = []
                self._callbacks.append(fn)
                return
        fn(self)

    def _wait(self, timeout):
        with _state_lock:
            if self.done():
                return True
            if self._event is None:
                self._event = threading.Event()
            event = self._event
        return event.wait(timeout)

    def result(self, timeout=None):
        if not self._wait(timeout):
            raise TimeoutError("reply not ready")
        if self._error is not None:
            raise self._error
        return self._value

    def exception(self, timeout=None):
        if not self._wait(timeout):
            raise TimeoutError("reply not ready")
        return self._error
