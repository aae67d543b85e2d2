import asyncio
from asyncio import Event


class ResponseBarrier:
    """
    Async primitive to wait until every expected server has answered.

    Servers are announced with `expect` before their request goes out and crossed off
    with `arrive`; the barrier opens once nobody is left.
    A barrier nobody was announced on never blocks.
    """

    _pending: set[int]
    _event: Event

    def __init__(self):
        self._pending = set()
        self._event = Event()
        self._event.set()

    @property
    def pending(self) -> frozenset[int]:
        return frozenset(self._pending)

    def expect(self, server: int):
        self._event.clear()
        self._pending.add(server)

    def arrive(self, server: int):
        # late or duplicate answers must not reopen anything
        self._pending.discard(server)
        if not self._pending:
            self._event.set()

    async def wait(self, timeout: None | float = None) -> bool:
        """
        Wait for all answers, at most `timeout` seconds.

        :return: whether every expected server answered in time
        """
        try:
            await asyncio.wait_for(self._event.wait(), timeout=timeout)
        except TimeoutError:
            return False
        return True
