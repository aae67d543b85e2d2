"""
Message-level emulation of a coded NFV deployment.

A controller agent (Server 0) receives the frames, combines them according to the
scheme and sends them to one decoder agent per server, all living in one mango
container.
Servers that are down never answer; the controller recovers from whatever arrived
before its deadline.
"""

import asyncio
import logging
import types
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import mango
import mango.container.core
import networkx as nx
import numpy as np

from ..channel import BscChannel, RngStream, ServerFailureModel
from ..convcode import DetectionMode, LinearCode, draw_messages
from ..errors import InvalidArgumentError, LengthMismatchError
from ..gf2 import BitVec
from ..schemes import NfvScheme, RecoveryResult, combine
from .agents import Agent, ControllerAgent, DecoderAgent
from .messages import Message

ADDRESS = ("127.0.0.1", 5555)
log = logging.getLogger(__name__)

Transfer = tuple[str, str, Message]


def create_topology(scheme: NfvScheme) -> nx.Graph:
    """
    Topology of the deployment.

    Nodes are `("controller", 0)`, `("server", j)` and `("frame", i)` with 1-based `i`
    and `j`.
    Frame nodes are joined to the servers whose input contains them (`kind="input"`),
    the controller to every server (`kind="link"`).
    Only the links carry messages; the input edges document the scheme.
    """
    topology = nx.Graph()
    controller = ("controller", 0)
    topology.add_node(controller)
    for j in range(scheme.n_servers):
        topology.add_node(("server", j + 1), index=j)
        topology.add_edge(controller, ("server", j + 1), kind="link")
    for i in range(scheme.n_frames):
        topology.add_node(("frame", i + 1))
        for j in np.flatnonzero(scheme.g_nfv.entries[i]):
            topology.add_edge(("frame", i + 1), ("server", int(j) + 1), kind="input")
    return topology


def create_agents(
    topology: nx.Graph,
    scheme: NfvScheme,
    code: LinearCode,
    available: Sequence[bool],
    trust: DetectionMode = DetectionMode.GENIE,
    deadline: float = 1.0,
    address: tuple[str, int] = ADDRESS,
) -> dict[str, Agent]:
    """
    One agent per controller and server node of the topology.

    :return: agents keyed by their agent id, the controller is `controller-0-agent`
    """
    if len(available) != scheme.n_servers:
        raise LengthMismatchError(len(available), scheme.n_servers)

    for node in topology.nodes:
        if node[0] in ("controller", "server"):
            agent_id = f"{node[0]}-{node[1]}-agent"
            topology.nodes[node]["agent_id"] = agent_id
            topology.nodes[node]["agent_address"] = mango.AgentAddress(address, agent_id)

    agents: dict[str, Agent] = {}
    servers: dict[int, mango.AgentAddress] = {}
    for node, data in topology.nodes(data=True):
        if node[0] != "server":
            continue
        j = data["index"]
        servers[j] = data["agent_address"]
        agents[data["agent_id"]] = DecoderAgent(
            server=j, code=code, available=bool(available[j]), mode=trust
        )

    controller = topology.nodes[("controller", 0)]
    agents[controller["agent_id"]] = ControllerAgent(
        scheme=scheme, servers=servers, trust=trust, deadline=deadline
    )
    return agents


def trace_container_messages(container: mango.container.core.Container) -> list[Transfer]:
    """
    Record every message sent through `container` by proxying its `send_message`.

    :return: list filled with `(sender, receiver, message)` as messages are sent
    """
    transfers: list[Transfer] = []
    original_send_message = container.send_message

    async def proxy_send_message(
        self: mango.container.core.Container,
        content: Message,
        receiver_addr: mango.AgentAddress,
        sender_id: None | str = None,
        **kwargs,
    ) -> bool:
        transfers.append((sender_id or "", receiver_addr.aid, content))
        return await original_send_message(content, receiver_addr, sender_id, **kwargs)

    container.send_message = types.MethodType(proxy_send_message, container)
    return transfers


def write_trace(path: Path, transfers: Sequence[Transfer]):
    """One TOML table per trial, transfers in sending order."""
    by_trial: dict[str, list[Transfer]] = {}
    for transfer in transfers:
        by_trial.setdefault(str(transfer[2].trial), []).append(transfer)
    with open(path, "w") as f:
        for trial, group in by_trial.items():
            f.write(f'["{trial}"]\n')
            f.write("transfers = [\n")
            for sender, receiver, message in group:
                kind = type(message).__name__
                f.write(f'  ["{sender}", "{receiver}", "{kind}", "{message.mid}"],\n')
            f.write("]\n\n")


async def run_container(
    agents: dict[str, Agent],
    received: Sequence[BitVec],
    targets: None | Sequence[BitVec] = None,
    trace_path: None | Path = None,
    address: tuple[str, int] = ADDRESS,
) -> RecoveryResult:
    """Run one trial through the agents and return the controller's recovery."""
    container = mango.create_tcp_container(addr=address)
    transfers = trace_container_messages(container)
    for aid, agent in agents.items():
        container.register(agent, aid)

    controller = next(a for a in agents.values() if isinstance(a, ControllerAgent))
    async with mango.activate(container):
        result = await controller.dispatch(received, targets)

    if trace_path is not None:
        write_trace(trace_path, transfers)
    return result


async def emulate_trial(
    code: LinearCode,
    scheme: NfvScheme,
    received: Sequence[BitVec],
    available: Sequence[bool],
    trust: DetectionMode = DetectionMode.GENIE,
    deadline: float = 1.0,
    targets: None | Sequence[BitVec] = None,
    trace_path: None | Path = None,
    address: tuple[str, int] = ADDRESS,
) -> RecoveryResult:
    """
    Emulate the controller and servers for one group of received frames.

    `targets` are the messages every server should decode to; genie detection needs
    them, CRC detection ignores them.
    """
    if trust is DetectionMode.GENIE and targets is None:
        raise InvalidArgumentError("genie detection needs the target messages")
    topology = create_topology(scheme)
    agents = create_agents(topology, scheme, code, available, trust, deadline, address)
    return await run_container(agents, received, targets, trace_path, address)


@dataclass(frozen=True)
class EmulationOutcome:
    result: RecoveryResult
    messages: tuple[BitVec, ...]
    available: tuple[bool, ...]

    @property
    def correct(self) -> bool:
        return self.result.recovered and self.result.messages == self.messages


def run_emulation(
    code: LinearCode,
    scheme: NfvScheme,
    p: float,
    q: float,
    seed: int,
    trust: DetectionMode = DetectionMode.GENIE,
    deadline: float = 1.0,
    trace_path: None | Path = None,
    address: tuple[str, int] = ADDRESS,
) -> EmulationOutcome:
    """
    Draw messages, channel noise and server failures for one trial and emulate it.

    Draws come from their own streams of `seed`, so an emulation is reproducible but
    does not repeat any trial of the Monte Carlo estimators.
    """
    messages = draw_messages(
        RngStream(seed, (0, "emulation-messages")).generator(),
        (scheme.n_frames,),
        code.k,
        trust,
    )
    codewords = code.encode_batch(messages)
    noise = BscChannel(p).noise(
        RngStream(seed, (0, "emulation-noise")).generator(), codewords.shape
    )
    available = ServerFailureModel(q, scheme.n_servers).availability(
        RngStream(seed, (0, "emulation-availability")).generator(), 1
    )[0]

    received = [BitVec.from_bits(row) for row in codewords ^ noise]
    targets = [BitVec.from_bits(row) for row in combine(scheme.g_nfv, messages)]
    result = asyncio.run(
        emulate_trial(
            code, scheme, received, available.tolist(), trust, deadline, targets,
            trace_path, address,
        )
    )
    return EmulationOutcome(
        result=result,
        messages=tuple(BitVec.from_bits(m) for m in messages),
        available=tuple(bool(a) for a in available),
    )


__all__ = [
    "ADDRESS",
    "ControllerAgent",
    "DecoderAgent",
    "EmulationOutcome",
    "create_agents",
    "create_topology",
    "emulate_trial",
    "run_container",
    "run_emulation",
    "trace_container_messages",
    "write_trace",
]
