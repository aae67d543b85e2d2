import logging
from collections.abc import Sequence
from typing import Any

import mango

from ..convcode import DetectionMode, LinearCode, decode, detect_error
from ..gf2 import BitVec
from ..schemes import NfvScheme, RecoveryResult, ServerOutcome, recover, server_inputs
from .ids import MessageId, TrialId
from .messages import DecodeRequest, DecodeResponse
from .util import ResponseBarrier

log = logging.getLogger(__name__)


class Agent(mango.Agent):
    """
    Base agent of the emulated cloud.

    Provides the `log` helper and dispatches incoming messages to async handlers, so
    derived agents can `await send_message` without scheduling tasks themselves.
    """

    def log(self, *msg):
        """
        Log with the agent id prefixed.

        Several messages are rendered as indented lines below the id.
        """
        match len(msg):
            case 1:
                log.info("%s: %s", self.aid, msg[0])
            case _:
                log.info("%s:\n%s", self.aid, "\n".join(f"\t{m}" for m in msg))

    def handle_message(self, content: Any, meta: dict[str, Any]):
        match content:
            case DecodeRequest():
                self.schedule_instant_task(self.handle_decode_request(content, meta))
            case DecodeResponse():
                self.schedule_instant_task(self.handle_decode_response(content, meta))
            case _:
                self.log(f"ignoring unexpected message {content!r}")

    async def handle_decode_request(self, request: DecodeRequest, meta: dict[str, Any]): ...

    async def handle_decode_response(
        self, response: DecodeResponse, meta: dict[str, Any]
    ): ...


class DecoderAgent(Agent):
    """
    A decoding server (VNF).

    An unavailable server swallows its requests; to the controller that looks exactly
    like a server that crashed.
    """

    server: int
    code: LinearCode
    available: bool
    mode: DetectionMode

    def __init__(
        self, *, server: int, code: LinearCode, available: bool, mode: DetectionMode
    ):
        super().__init__()
        self.server = server
        self.code = code
        self.available = available
        self.mode = mode

    async def handle_decode_request(self, request, meta):
        if not self.available:
            self.log(f"down, dropping request of {request.trial}")
            return
        decoded = decode(self.code, request.frame)
        passed = detect_error(self.mode, decoded, request.target)
        response = DecodeResponse(
            mid=MessageId(),
            trial=request.trial,
            server=self.server,
            decoded=decoded,
            passed=passed,
        )
        await self.send_message(response, mango.sender_addr(meta))


class ControllerAgent(Agent):
    """
    Server 0: combines the received frames, hands them to the decoders and recovers the
    messages from whatever comes back before the deadline.
    """

    scheme: NfvScheme
    servers: dict[int, mango.AgentAddress]
    trust: DetectionMode
    deadline: float
    pending: dict[TrialId, tuple[ResponseBarrier, dict[int, DecodeResponse]]]

    def __init__(
        self,
        *,
        scheme: NfvScheme,
        servers: dict[int, mango.AgentAddress],
        trust: DetectionMode,
        deadline: float,
    ):
        super().__init__()
        self.scheme = scheme
        self.servers = servers
        self.trust = trust
        self.deadline = deadline
        self.pending = {}

    async def dispatch(
        self,
        received: Sequence[BitVec],
        targets: None | Sequence[BitVec] = None,
    ) -> RecoveryResult:
        """
        Run one trial.

        :param received: the K frames as they came off the channel
        :param targets: per server the message it should decode, for genie detection
        """
        trial = TrialId()
        barrier = ResponseBarrier()
        answers: dict[int, DecodeResponse] = {}
        self.pending[trial] = (barrier, answers)

        inputs = server_inputs(self.scheme, received)
        for j, address in sorted(self.servers.items()):
            barrier.expect(j)
            request = DecodeRequest(
                mid=MessageId(),
                trial=trial,
                server=j,
                frame=inputs[j],
                target=targets[j] if targets is not None else None,
            )
            await self.send_message(request, address)

        if not await barrier.wait(self.deadline):
            self.log(
                f"deadline of {self.deadline}s passed for {trial}",
                f"no answer from servers {sorted(barrier.pending)}",
            )
        del self.pending[trial]

        outcomes = [
            ServerOutcome(available=True, decoded=answers[j].decoded, correct=answers[j].passed)
            if j in answers
            else ServerOutcome(available=False)
            for j in range(self.scheme.n_servers)
        ]
        result = recover(self.scheme, outcomes, self.trust)
        self.log(f"{trial}: {result.status} using servers {sorted(result.servers)}")
        return result

    async def handle_decode_response(self, response, meta):
        if response.trial not in self.pending:
            self.log(f"late answer of server {response.server} for {response.trial}")
            return
        barrier, answers = self.pending[response.trial]
        answers[response.server] = response
        barrier.arrive(response.server)
