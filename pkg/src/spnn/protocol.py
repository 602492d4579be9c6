"""Four-role training protocol for a vertically partitioned dense network.

Roles: a coordinator (control plane and trusted triple dealer), a compute
server (hidden stack), and two data-holder clients.  Client A holds the left
feature block, the labels and the prediction head; client B holds the right
feature block.  Per training step the clients jointly produce the first
hidden layer pre-activation under arithmetic sharing (ss), additive
homomorphic encryption (he), or a test-only exact float path; the server
applies the first activation, runs the hidden stack, and routes gradients
back.  The plaintext input gradient sent to both clients is the documented
leakage surface of this design; labels and client parameters never reach the
server.

All cross-role interaction is message passing over a transport endpoint;
roles run as independent threads and hold no shared mutable state.
"""

from __future__ import annotations

import json
import math
import random
import struct
import threading
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    InvalidSpec,
    LinkClosed,
    PeerClosed,
    RowCountMismatch,
    SequenceViolation,
    ShapeMismatch,
)
from .fixedpoint import FixedPointCodec
from .neural import (
    AffineLayer,
    Mlp,
    activate,
    activate_grad,
    auc,
    cross_entropy,
    glorot_init,
    head_backward,
    output_gradient,
    predict_head,
    sgd_step,
    sgld_step,
)
from .paillier import (
    Ciphertext,
    PaillierPublicKey,
    SignedEncoder,
    add_ct,
    decrypt,
    encrypt,
    keygen,
)
from .secretshare import (
    BeaverTriple,
    LocalChannel,
    PairwiseChannel,
    ShareMatrix,
    gen_matmul_triple,
    matmul_shared,
    matrix_from_bytes,
    matrix_to_bytes,
    run_pairwise,
    shr_matrix,
)
from .transport import (
    MsgType,
    NetworkConfig,
    SimEndpoint,
    SimNetwork,
    TcpEndpoint,
    WireFrame,
)

COORDINATOR = "coordinator"
SERVER = "server"
CLIENT_A = "client_a"
CLIENT_B = "client_b"
ROLES = (COORDINATOR, SERVER, CLIENT_A, CLIENT_B)

BODY_ACTIVATIONS = ("sigmoid", "relu", "identity")
HEAD_ACTIVATIONS = ("sigmoid", "softmax")


# -- configuration ---------------------------------------------------------------


@dataclass
class TrainConfig:
    d_a: int
    d_b: int
    layer_dims: list          # [input, first_hidden, ..., output]
    activations: list         # body activations, one per non-head affine
    head_activation: str = "sigmoid"
    protocol_mode: str = "ss"  # ss | he
    optimizer: str = "sgd"     # sgd | sgld
    sgld_scope: str = "server"  # server | all
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 1
    seed: int = 1
    noise_seed: int | None = None  # SGLD noise stream; defaults to seed
    paillier_bits: int = 2048
    ell: int = 64
    frac_bits: int = 16
    exact_float: bool = False   # test-only float path, disables fixed point
    eval_each_epoch: bool = True
    early_stop_loss: float | None = None
    bandwidth_bps: float = 100e6
    latency_s: float = 0.001
    transport: str = "sim"      # sim | tcp
    endpoints: dict | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.epochs < 1:
            raise InvalidSpec("epochs must be at least 1")
        if len(self.layer_dims) < 3:
            raise InvalidSpec("need input, first hidden and output dimensions")
        if self.d_a + self.d_b != self.layer_dims[0]:
            raise InvalidSpec(
                f"d_a + d_b = {self.d_a + self.d_b} != input width {self.layer_dims[0]}"
            )
        if self.d_a < 1 or self.d_b < 1:
            raise InvalidSpec("both clients need at least one feature column")
        if len(self.activations) != len(self.layer_dims) - 2:
            raise InvalidSpec("need one body activation per non-head affine layer")
        for act in self.activations:
            if act not in BODY_ACTIVATIONS:
                raise InvalidSpec(f"unknown activation {act!r}")
        if self.head_activation not in HEAD_ACTIVATIONS:
            raise InvalidSpec(f"unknown head activation {self.head_activation!r}")
        if self.protocol_mode not in ("ss", "he"):
            raise InvalidSpec(f"unknown protocol mode {self.protocol_mode!r}")
        if self.optimizer not in ("sgd", "sgld"):
            raise InvalidSpec(f"unknown optimizer {self.optimizer!r}")
        if self.sgld_scope not in ("server", "all"):
            raise InvalidSpec(f"unknown sgld scope {self.sgld_scope!r}")
        if self.learning_rate <= 0:
            raise InvalidSpec("learning rate must be positive")
        if self.batch_size < 1:
            raise InvalidSpec("batch_size must be positive")
        if self.transport not in ("sim", "tcp"):
            raise InvalidSpec(f"unknown transport {self.transport!r}")

    def codec(self) -> FixedPointCodec:
        return FixedPointCodec(ell=self.ell, frac_bits=self.frac_bits)

    @property
    def effective_noise_seed(self) -> int:
        return self.seed if self.noise_seed is None else self.noise_seed

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))


@dataclass
class PlacementPlan:
    """Deterministic assignment of model blocks to roles."""

    d_a: int
    d_b: int
    joint_out: int
    first_activation: str
    server_dims: list          # hidden stack widths after the first layer
    server_activations: list
    head_in: int
    head_out: int
    head_activation: str
    server_identity: bool
    label_owner: str = CLIENT_A

    def to_bytes(self) -> bytes:
        return json.dumps(asdict(self), sort_keys=True).encode()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PlacementPlan":
        return cls(**json.loads(data.decode()))


def split_graph(cfg: TrainConfig) -> PlacementPlan:
    """First affine to the clients jointly, middle stack to the server,
    prediction head to the label holder."""
    dims = cfg.layer_dims
    server_dims = dims[1:-1]  # widths from first hidden to last hidden
    return PlacementPlan(
        d_a=cfg.d_a,
        d_b=cfg.d_b,
        joint_out=dims[1],
        first_activation=cfg.activations[0],
        server_dims=list(server_dims),
        server_activations=list(cfg.activations[1:]),
        head_in=dims[-2],
        head_out=dims[-1],
        head_activation=cfg.head_activation,
        server_identity=len(server_dims) == 1,
    )


def init_model_parameters(cfg: TrainConfig):
    """Deterministic initial parameters shared by the protocol roles and the
    monolithic plaintext baseline (so seeded comparisons are meaningful)."""
    dims = cfg.layer_dims
    theta = glorot_init(dims[0], dims[1], np.random.default_rng([cfg.seed, 0]))
    first_bias = np.zeros(dims[1])
    stack_rng = np.random.default_rng([cfg.seed, 2])
    stack = [
        AffineLayer(glorot_init(dims[i], dims[i + 1], stack_rng), np.zeros(dims[i + 1]),
                    cfg.activations[i])
        for i in range(1, len(dims) - 2)
    ]
    head = AffineLayer(
        glorot_init(dims[-2], dims[-1], np.random.default_rng([cfg.seed, 3])),
        np.zeros(dims[-1]),
        cfg.head_activation,
    )
    return theta, first_bias, stack, head


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, 1000 + epoch]).permutation(n)


def batch_row_counts(n: int, batch_size: int) -> list[int]:
    counts = [batch_size] * (n // batch_size)
    if n % batch_size:
        counts.append(n % batch_size)
    return counts


# -- payload codecs ----------------------------------------------------------------

_FHDR = struct.Struct("<II")


def floats_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return _FHDR.pack(*arr.shape) + arr.tobytes()


def floats_from_bytes(data: bytes) -> np.ndarray:
    rows, cols = _FHDR.unpack_from(data)
    out = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=_FHDR.size)
    return out.reshape(rows, cols).astype(np.float64)


def _walk_matrices(data: bytes, codec: FixedPointCodec, count: int):
    width = (codec.ell + 7) // 8
    out = []
    offset = 0
    for _ in range(count):
        rows, cols = _FHDR.unpack_from(data, offset)
        size = _FHDR.size + rows * cols * width
        out.append(matrix_from_bytes(data[offset : offset + size], codec))
        offset += size
    return out


def triples_to_bytes(triples, codec: FixedPointCodec) -> bytes:
    parts = []
    for t in triples:
        parts += [matrix_to_bytes(t.u, codec), matrix_to_bytes(t.v, codec),
                  matrix_to_bytes(t.w, codec)]
    return b"".join(parts)


def triples_from_bytes(data: bytes, party: int, codec: FixedPointCodec):
    mats = _walk_matrices(data, codec, 6)
    return (BeaverTriple(party, *mats[0:3]), BeaverTriple(party, *mats[3:6]))


def cts_to_bytes(cts: list[Ciphertext], rows: int, cols: int) -> bytes:
    return _FHDR.pack(rows, cols) + b"".join(ct.to_bytes() for ct in cts)


def cts_from_bytes(data: bytes, pk: PaillierPublicKey):
    rows, cols = _FHDR.unpack_from(data)
    cts = []
    offset = _FHDR.size
    for _ in range(rows * cols):
        ct, used = Ciphertext.from_bytes(data[offset:], pk)
        cts.append(ct)
        offset += used
    return rows, cols, cts


def control(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True).encode()


def parse_control(frame: WireFrame) -> dict:
    return json.loads(frame.payload.decode())


# -- node wrapper --------------------------------------------------------------------


class ProtocolNode:
    """Session-aware endpoint: stamps per-direction step numbers, enforces the
    strictly-increasing step invariant, checks expected message types, tracks
    per-(peer, type) byte counts and charges compute time to the transport."""

    def __init__(self, endpoint, role: str, session_id: int, tap=None):
        self.endpoint = endpoint
        self.role = role
        self.session_id = session_id
        self.tap = tap
        self._out_steps: dict[str, int] = {}
        self._in_steps: dict[str, int] = {}
        self.sent_bytes: dict[tuple[str, str], int] = {}
        self.sent_frames: dict[tuple[str, str], int] = {}
        self.compute_seconds = 0.0

    def send(self, dst: str, msg_type: MsgType, payload: bytes = b"") -> None:
        step = self._out_steps.get(dst, 0) + 1
        self._out_steps[dst] = step
        frame = WireFrame(self.session_id, step, msg_type, payload)
        key = (dst, msg_type.name)
        self.sent_bytes[key] = self.sent_bytes.get(key, 0) + frame.wire_size
        self.sent_frames[key] = self.sent_frames.get(key, 0) + 1
        if self.tap is not None:
            self.tap(self.role, "send", dst, frame)
        self.endpoint.send(dst, frame)

    def recv(self, src: str, *expected: MsgType) -> WireFrame:
        frame = self.endpoint.recv(src)
        if frame.session_id != self.session_id:
            raise SequenceViolation(
                f"{self.role}: frame for session {frame.session_id}, "
                f"expected {self.session_id}"
            )
        last = self._in_steps.get(src, 0)
        if frame.step <= last:
            raise SequenceViolation(
                f"{self.role}: step {frame.step} from {src} not after {last}"
            )
        self._in_steps[src] = frame.step
        if expected and frame.msg_type not in expected:
            raise SequenceViolation(
                f"{self.role}: got {frame.msg_type.name} from {src}, "
                f"expected {[e.name for e in expected]}"
            )
        if self.tap is not None:
            self.tap(self.role, "recv", src, frame)
        return frame

    @contextmanager
    def compute(self):
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.compute_seconds += elapsed
            self.endpoint.advance(elapsed)


class NodeChannel(PairwiseChannel):
    """PairwiseChannel between the two clients, carried as ShareTransfer frames."""

    def __init__(self, node: ProtocolNode, party: int, peer: str):
        super().__init__(party)
        self.node = node
        self.peer = peer

    def _send_raw(self, payload: bytes) -> None:
        self.node.send(self.peer, MsgType.SHARE_TRANSFER, payload)

    def _recv_raw(self) -> bytes:
        return self.node.recv(self.peer, MsgType.SHARE_TRANSFER).payload


# -- joint first-hidden computations ----------------------------------------------------


def share_exchange(party: int, own_block: np.ndarray, ch: PairwiseChannel,
                   codec: FixedPointCodec, rng: np.random.Generator, axis: int) -> np.ndarray:
    """Share one party's block with the peer and return this party's share of
    the concatenation (A block first along `axis`)."""
    s0, s1 = shr_matrix(codec.encode(own_block), codec, rng)
    keep, give = (s0, s1) if party == 0 else (s1, s0)
    ch.send(matrix_to_bytes(give.values, codec))
    other = matrix_from_bytes(ch.recv(), codec)
    if other.shape[1 - axis] != keep.values.shape[1 - axis]:
        raise RowCountMismatch(
            f"peer block shaped {other.shape} does not align with {keep.values.shape}"
        )
    blocks = (keep.values, other) if party == 0 else (other, keep.values)
    return np.concatenate(blocks, axis=axis)


def client_first_hidden_ss(party: int, x_block: np.ndarray, theta_share: ShareMatrix,
                           triples, ch: PairwiseChannel, codec: FixedPointCodec,
                           rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Client side of the shared first-layer product.

    Returns (product share to send up, this party's share of the concatenated
    batch, kept for the backward pass).
    """
    x_share = share_exchange(party, x_block, ch, codec, rng, axis=1)
    prod = matmul_shared(ShareMatrix(party, x_share), theta_share, triples, ch, codec)
    return prod.values, x_share


def client_he_plaintexts(x_block: np.ndarray, theta_block: np.ndarray,
                         codec: FixedPointCodec, encoder: SignedEncoder) -> list[int]:
    """Fixed-point partial product X_p . theta_p, embedded into Z_n row-major."""
    prod = codec.matmul(codec.encode(x_block), codec.encode(theta_block))
    scaled = codec.to_signed(codec.truncate(prod))
    return [encoder.encode_scaled(int(v)) for v in scaled.ravel()]


def server_decrypt_hidden(payload: bytes, keypair, encoder: SignedEncoder) -> np.ndarray:
    rows, cols, cts = cts_from_bytes(payload, keypair.pk)
    values = [encoder.decode_signed(decrypt(keypair.sk, ct)) for ct in cts]
    return np.array(values).reshape(rows, cols)


# -- scaled public multiplication on shares -----------------------------------------------


def small_scalar(c: float) -> tuple[int, int]:
    """Represent a positive scalar as (mantissa, shift) with a 7-bit mantissa.

    Keeping the mantissa small caps the magnitude entering the local shared
    shift, which keeps the truncation failure probability negligible.
    """
    if c <= 0:
        raise ValueError("scalar must be positive")
    shift = max(0, 6 - math.floor(math.log2(c)))
    mantissa = max(1, round(c * 2**shift))
    return mantissa, shift


def scale_share(values: np.ndarray, c: float, codec: FixedPointCodec) -> np.ndarray:
    """Multiply a share matrix by a public non-negative scalar, locally."""
    if c == 0:
        return np.zeros_like(values)
    mantissa, shift = small_scalar(c)
    return codec.truncate_bits(codec.mul(values, np.uint64(mantissa)), shift)


# -- role loops ----------------------------------------------------------------------------


def _optim_step(param, grad, cfg: TrainConfig, batch, noisy: bool, rng,
                dataset_size: int = 1):
    """One optimizer step on a batch-summed gradient.

    The Langevin update drives the gradient of the loss summed over the whole
    training set, estimated from the batch as (N / |B|) * batch_sum; the noise
    variance stays the per-step rate.
    """
    if noisy:
        return sgld_step(param, grad * dataset_size, cfg.learning_rate, batch, rng)
    return sgd_step(param, grad, cfg.learning_rate, batch)


def _run_coordinator(node: ProtocolNode, cfg: TrainConfig, n_train: int, n_test: int,
                     out: dict):
    plan = split_graph(cfg)
    for role in (SERVER, CLIENT_A, CLIENT_B):
        node.send(role, MsgType.CONTROL, control({"command": "start",
                                                  "plan": asdict(plan)}))
    for role in (SERVER, CLIENT_A, CLIENT_B):
        ack = parse_control(node.recv(role, MsgType.CONTROL))
        if ack.get("ack") != role:
            raise SequenceViolation(f"bad start ack from {role}: {ack}")

    codec = cfg.codec()
    dealer_rng = np.random.default_rng([cfg.seed, 7])
    d, m = cfg.layer_dims[0], cfg.layer_dims[1]
    history = []
    triples_dealt = 0
    stop_reason = "epochs"
    for epoch in range(cfg.epochs):
        perm = epoch_permutation(cfg.seed, epoch, n_train)
        train_counts = batch_row_counts(n_train, cfg.batch_size)
        eval_counts = batch_row_counts(n_test, cfg.batch_size) if cfg.eval_each_epoch else []
        header = {"command": "epoch", "epoch": epoch, "n_train": n_train,
                  "train_batches": len(train_counts), "eval_batches": len(eval_counts)}
        node.send(SERVER, MsgType.CONTROL, control(header))
        for role in (CLIENT_A, CLIENT_B):
            node.send(role, MsgType.CONTROL,
                      control(header | {"permutation": perm.tolist()}))
        if cfg.protocol_mode == "ss" and not cfg.exact_float:
            # dealt ahead of the epoch, consumed one message per batch
            for nb in train_counts + eval_counts:
                first = gen_matmul_triple(codec, dealer_rng, nb, d, m)
                second = gen_matmul_triple(codec, dealer_rng, nb, d, m)
                node.send(CLIENT_A, MsgType.TRIPLE_DEAL,
                          triples_to_bytes((first[0], second[0]), codec))
                node.send(CLIENT_B, MsgType.TRIPLE_DEAL,
                          triples_to_bytes((first[1], second[1]), codec))
                triples_dealt += 2
        metrics = parse_control(node.recv(CLIENT_A, MsgType.CONTROL))
        history.append(metrics)
        if (cfg.early_stop_loss is not None
                and metrics["train_loss"] <= cfg.early_stop_loss):
            stop_reason = "early_stop"
            break
    for role in (SERVER, CLIENT_A, CLIENT_B):
        node.send(role, MsgType.CONTROL, control({"command": "stop"}))
    out["history"] = history
    out["triples_dealt"] = triples_dealt
    out["stop_reason"] = stop_reason


def _run_server(node: ProtocolNode, cfg: TrainConfig, out: dict):
    start = parse_control(node.recv(COORDINATOR, MsgType.CONTROL))
    plan = PlacementPlan(**start["plan"])
    _, first_bias, stack_layers, _ = init_model_parameters(cfg)
    stack = Mlp(stack_layers) if stack_layers else None
    node.send(COORDINATOR, MsgType.CONTROL, control({"ack": SERVER}))

    codec = cfg.codec()
    keypair = None
    encoder = None
    if cfg.protocol_mode == "he" and not cfg.exact_float:
        with node.compute():
            keypair = keygen(cfg.paillier_bits, random.Random(cfg.seed * 31 + 5))
            encoder = SignedEncoder(keypair.pk.n, cfg.frac_bits)
        for role in (CLIENT_A, CLIENT_B):
            node.send(role, MsgType.KEY_DISTRIBUTION, keypair.pk.to_bytes())
    sgld_rng = np.random.default_rng([cfg.effective_noise_seed, 4])
    noisy = cfg.optimizer == "sgld"

    def receive_first_hidden() -> np.ndarray:
        if cfg.exact_float:
            return floats_from_bytes(
                node.recv(CLIENT_B, MsgType.HIDDEN_LAYER_UP).payload)
        if cfg.protocol_mode == "ss":
            share_a = matrix_from_bytes(
                node.recv(CLIENT_A, MsgType.HIDDEN_LAYER_UP).payload, codec)
            share_b = matrix_from_bytes(
                node.recv(CLIENT_B, MsgType.HIDDEN_LAYER_UP).payload, codec)
            with node.compute():
                return codec.decode(codec.add(share_a, share_b))
        payload = node.recv(CLIENT_B, MsgType.CIPHERTEXT_TRANSFER).payload
        with node.compute():
            return server_decrypt_hidden(payload, keypair, encoder)

    def forward(pre: np.ndarray):
        with node.compute():
            z1 = pre + first_bias
            h1 = activate(z1, plan.first_activation)
            if stack is not None:
                h_last, cache = stack.forward(h1)
            else:
                h_last, cache = h1, None
        node.send(CLIENT_A, MsgType.LAST_HIDDEN_TO_A, floats_to_bytes(h_last))
        return z1, cache

    while True:
        msg = parse_control(node.recv(COORDINATOR, MsgType.CONTROL))
        if msg["command"] == "stop":
            break
        for _ in range(msg["train_batches"]):
            pre = receive_first_hidden()
            z1, cache = forward(pre)
            dh_last = floats_from_bytes(
                node.recv(CLIENT_A, MsgType.HEAD_GRAD_DOWN).payload)
            with node.compute():
                if stack is not None:
                    grads, dh1 = stack.backward(cache, dh_last)
                else:
                    grads, dh1 = [], dh_last
                g = dh1 * activate_grad(z1, plan.first_activation)
                batch = g.shape[0]
                n_train = msg["n_train"]
                for layer, (dw, db) in zip(stack.layers if stack else [], grads):
                    layer.weights = _optim_step(layer.weights, dw, cfg, batch, noisy,
                                                sgld_rng, n_train)
                    layer.bias = _optim_step(layer.bias, db, cfg, batch, noisy,
                                             sgld_rng, n_train)
                first_bias = _optim_step(first_bias, g.sum(axis=0), cfg, batch,
                                         noisy, sgld_rng, n_train)
            payload = floats_to_bytes(g)
            node.send(CLIENT_A, MsgType.INPUT_GRAD_DOWN, payload)
            node.send(CLIENT_B, MsgType.INPUT_GRAD_DOWN, payload)
        for _ in range(msg["eval_batches"]):
            forward(receive_first_hidden())

    out["stack"] = stack.layers if stack is not None else []
    out["first_bias"] = first_bias
    out["server_had_secret_key"] = keypair is not None


def _run_client_a(node: ProtocolNode, cfg: TrainConfig, x_train: np.ndarray,
                  y_train: np.ndarray, x_test: np.ndarray, y_test, out: dict):
    start = parse_control(node.recv(COORDINATOR, MsgType.CONTROL))
    plan = PlacementPlan(**start["plan"])
    theta_full, _, _, head = init_model_parameters(cfg)
    theta_own = theta_full[: cfg.d_a].copy()
    node.send(COORDINATOR, MsgType.CONTROL, control({"ack": CLIENT_A}))

    codec = cfg.codec()
    party = 0
    ch = NodeChannel(node, party, CLIENT_B)
    share_rng = np.random.default_rng([cfg.seed, 5])
    sgld_rng = np.random.default_rng([cfg.effective_noise_seed, 8])
    noisy_local = cfg.optimizer == "sgld" and cfg.sgld_scope == "all"
    secure_ss = cfg.protocol_mode == "ss" and not cfg.exact_float
    secure_he = cfg.protocol_mode == "he" and not cfg.exact_float

    theta_share = None
    pk = encoder = he_rng = None
    if secure_ss:
        theta_share = ShareMatrix(
            party, share_exchange(party, theta_own, ch, codec, share_rng, axis=0))
    elif secure_he:
        pk = PaillierPublicKey.from_bytes(
            node.recv(SERVER, MsgType.KEY_DISTRIBUTION).payload)
        encoder = SignedEncoder(pk.n, cfg.frac_bits)
        he_rng = random.Random(cfg.seed * 31 + 11)

    triples_consumed = 0

    def forward_batch(x_batch):
        """Run this client's side of the forward pass; returns per-mode state."""
        nonlocal triples_consumed
        state = None
        if secure_ss:
            deal = node.recv(COORDINATOR, MsgType.TRIPLE_DEAL)
            triples = triples_from_bytes(deal.payload, party, codec)
            with node.compute():
                prod_share, x_share = client_first_hidden_ss(
                    party, x_batch, theta_share, triples, ch, codec, share_rng)
            triples_consumed += 2
            node.send(SERVER, MsgType.HIDDEN_LAYER_UP, matrix_to_bytes(prod_share, codec))
            state = x_share
        elif secure_he:
            with node.compute():
                plain = client_he_plaintexts(x_batch, theta_own, codec, encoder)
                cts = [encrypt(pk, v, he_rng) for v in plain]
                payload = cts_to_bytes(cts, x_batch.shape[0], plan.joint_out)
            node.send(CLIENT_B, MsgType.CIPHERTEXT_TRANSFER, payload)
        else:
            node.send(CLIENT_B, MsgType.SHARE_TRANSFER, floats_to_bytes(x_batch))
            node.send(CLIENT_B, MsgType.SHARE_TRANSFER, floats_to_bytes(theta_own))
        h_last = floats_from_bytes(node.recv(SERVER, MsgType.LAST_HIDDEN_TO_A).payload)
        return h_last, state

    def backward_batch(x_batch, y_batch, h_last, y_hat, state, n_train):
        nonlocal theta_own
        batch = len(y_batch)
        with node.compute():
            logit_grad = output_gradient(y_hat, y_batch)
            dw, db, dh_last = head_backward(h_last, head, logit_grad)
        node.send(SERVER, MsgType.HEAD_GRAD_DOWN, floats_to_bytes(dh_last))
        with node.compute():
            head.weights = _optim_step(head.weights, dw, cfg, batch, noisy_local,
                                       sgld_rng, n_train)
            head.bias = _optim_step(head.bias, db, cfg, batch, noisy_local,
                                    sgld_rng, n_train)
        g = floats_from_bytes(node.recv(SERVER, MsgType.INPUT_GRAD_DOWN).payload)
        if secure_ss:
            with node.compute():
                update = _ss_theta_update(state, g, cfg, codec, n_train)
                theta_share.values = codec.sub(theta_share.values, update)
                if noisy_local:
                    noise = sgld_rng.normal(
                        0.0, np.sqrt(cfg.learning_rate), size=(cfg.d_a, plan.joint_out))
                    theta_share.values[: cfg.d_a] = codec.sub(
                        theta_share.values[: cfg.d_a], codec.encode(noise))
        elif secure_he:
            with node.compute():
                grad = x_batch.T @ g
                theta_own = _optim_step(theta_own, grad, cfg, batch, noisy_local,
                                        sgld_rng, n_train)
        else:
            slice_own = floats_from_bytes(
                node.recv(CLIENT_B, MsgType.SHARE_TRANSFER).payload)
            with node.compute():
                theta_own = _optim_step(theta_own, slice_own, cfg, batch,
                                        noisy_local, sgld_rng, n_train)

    while True:
        msg = parse_control(node.recv(COORDINATOR, MsgType.CONTROL))
        if msg["command"] == "stop":
            break
        perm = np.asarray(msg["permutation"], dtype=np.int64)
        counts = batch_row_counts(len(perm), cfg.batch_size)
        loss_sum = 0.0
        offset = 0
        for nb in counts[: msg["train_batches"]]:
            rows = perm[offset : offset + nb]
            offset += nb
            x_batch, y_batch = x_train[rows], y_train[rows]
            h_last, state = forward_batch(x_batch)
            with node.compute():
                y_hat = predict_head(h_last, head)
                loss_sum += cross_entropy(y_hat, y_batch) * nb
            backward_batch(x_batch, y_batch, h_last, y_hat, state, len(perm))
        metrics = {"epoch": msg["epoch"], "train_loss": loss_sum / max(len(perm), 1)}
        if msg["eval_batches"]:
            scores, eval_loss = [], 0.0
            eval_offset = 0
            for nb in batch_row_counts(len(x_test), cfg.batch_size):
                x_batch = x_test[eval_offset : eval_offset + nb]
                eval_offset += nb
                h_last, _ = forward_batch(x_batch)
                with node.compute():
                    y_hat = predict_head(h_last, head)
                    scores.append(y_hat[:, 0] if y_hat.shape[1] == 1 else y_hat[:, 1])
                    eval_loss += cross_entropy(y_hat, y_test[eval_offset - nb : eval_offset]) * nb
            scores = np.concatenate(scores)
            metrics["test_loss"] = eval_loss / len(x_test)
            if len(np.unique(y_test)) == 2:
                metrics["test_auc"] = auc(scores, y_test)
        node.send(COORDINATOR, MsgType.CONTROL, control(metrics))

    out["theta_share_a"] = None if theta_share is None else theta_share.values
    out["theta_a"] = theta_own
    out["head"] = head
    out["triples_consumed_a"] = triples_consumed


def _ss_theta_update(x_share: np.ndarray, g: np.ndarray, cfg: TrainConfig,
                     codec: FixedPointCodec, dataset_size: int) -> np.ndarray:
    """This party's share of the scaled first-layer gradient step.

    The input gradient is public to the clients, so the gradient share is the
    local ring product <X>^T . enc(g / batch); the learning-rate factor is a
    public scalar applied with a short mantissa to keep the local truncation
    safe.  SGLD halves the rate per the Langevin update rule.
    """
    batch = g.shape[0]
    rate = cfg.learning_rate
    if cfg.optimizer == "sgld" and cfg.sgld_scope == "all":
        rate = rate * dataset_size / 2.0
    grad_share = codec.truncate(codec.matmul(x_share.T, codec.encode(g / batch)))
    return scale_share(grad_share, rate, codec)


def _run_client_b(node: ProtocolNode, cfg: TrainConfig, x_train: np.ndarray,
                  x_test: np.ndarray, out: dict):
    start = parse_control(node.recv(COORDINATOR, MsgType.CONTROL))
    plan = PlacementPlan(**start["plan"])
    theta_full, _, _, _ = init_model_parameters(cfg)
    theta_own = theta_full[cfg.d_a :].copy()
    node.send(COORDINATOR, MsgType.CONTROL, control({"ack": CLIENT_B}))

    codec = cfg.codec()
    party = 1
    ch = NodeChannel(node, party, CLIENT_A)
    share_rng = np.random.default_rng([cfg.seed, 6])
    sgld_rng = np.random.default_rng([cfg.effective_noise_seed, 9])
    noisy_local = cfg.optimizer == "sgld" and cfg.sgld_scope == "all"
    secure_ss = cfg.protocol_mode == "ss" and not cfg.exact_float
    secure_he = cfg.protocol_mode == "he" and not cfg.exact_float

    theta_share = None
    pk = encoder = he_rng = None
    if secure_ss:
        theta_share = ShareMatrix(
            party, share_exchange(party, theta_own, ch, codec, share_rng, axis=0))
    elif secure_he:
        pk = PaillierPublicKey.from_bytes(
            node.recv(SERVER, MsgType.KEY_DISTRIBUTION).payload)
        encoder = SignedEncoder(pk.n, cfg.frac_bits)
        he_rng = random.Random(cfg.seed * 31 + 13)

    triples_consumed = 0

    def forward_batch(x_batch):
        nonlocal triples_consumed
        state = None
        if secure_ss:
            deal = node.recv(COORDINATOR, MsgType.TRIPLE_DEAL)
            triples = triples_from_bytes(deal.payload, party, codec)
            with node.compute():
                prod_share, x_share = client_first_hidden_ss(
                    party, x_batch, theta_share, triples, ch, codec, share_rng)
            triples_consumed += 2
            node.send(SERVER, MsgType.HIDDEN_LAYER_UP, matrix_to_bytes(prod_share, codec))
            state = x_share
        elif secure_he:
            frame = node.recv(CLIENT_A, MsgType.CIPHERTEXT_TRANSFER)
            with node.compute():
                rows, cols, cts_a = cts_from_bytes(frame.payload, pk)
                if rows != x_batch.shape[0]:
                    raise RowCountMismatch(
                        f"peer ciphertext batch has {rows} rows, local {x_batch.shape[0]}")
                plain = client_he_plaintexts(x_batch, theta_own, codec, encoder)
                summed = [add_ct(ca, encrypt(pk, v, he_rng))
                          for ca, v in zip(cts_a, plain)]
                payload = cts_to_bytes(summed, rows, cols)
            node.send(SERVER, MsgType.CIPHERTEXT_TRANSFER, payload)
        else:
            x_a = floats_from_bytes(node.recv(CLIENT_A, MsgType.SHARE_TRANSFER).payload)
            theta_a = floats_from_bytes(node.recv(CLIENT_A, MsgType.SHARE_TRANSFER).payload)
            with node.compute():
                x_full = np.concatenate([x_a, x_batch], axis=1)
                theta = np.vstack([theta_a, theta_own])
                pre = x_full @ theta
            node.send(SERVER, MsgType.HIDDEN_LAYER_UP, floats_to_bytes(pre))
            state = x_full
        return state

    def backward_batch(x_batch, state, n_train):
        nonlocal theta_own
        g = floats_from_bytes(node.recv(SERVER, MsgType.INPUT_GRAD_DOWN).payload)
        batch = g.shape[0]
        if secure_ss:
            with node.compute():
                update = _ss_theta_update(state, g, cfg, codec, n_train)
                theta_share.values = codec.sub(theta_share.values, update)
                if noisy_local:
                    noise = sgld_rng.normal(
                        0.0, np.sqrt(cfg.learning_rate), size=(cfg.d_b, plan.joint_out))
                    theta_share.values[cfg.d_a :] = codec.sub(
                        theta_share.values[cfg.d_a :], codec.encode(noise))
        elif secure_he:
            with node.compute():
                grad = x_batch.T @ g
                theta_own = _optim_step(theta_own, grad, cfg, batch, noisy_local,
                                        sgld_rng, n_train)
        else:
            with node.compute():
                grad_full = state.T @ g  # single matmul, mirrors the monolithic model
            node.send(CLIENT_A, MsgType.SHARE_TRANSFER,
                      floats_to_bytes(grad_full[: cfg.d_a]))
            with node.compute():
                theta_own = _optim_step(theta_own, grad_full[cfg.d_a :], cfg, batch,
                                        noisy_local, sgld_rng, n_train)

    while True:
        msg = parse_control(node.recv(COORDINATOR, MsgType.CONTROL))
        if msg["command"] == "stop":
            break
        perm = np.asarray(msg["permutation"], dtype=np.int64)
        counts = batch_row_counts(len(perm), cfg.batch_size)
        offset = 0
        for nb in counts[: msg["train_batches"]]:
            rows = perm[offset : offset + nb]
            offset += nb
            x_batch = x_train[rows]
            state = forward_batch(x_batch)
            backward_batch(x_batch, state, len(perm))
        eval_offset = 0
        for nb in batch_row_counts(len(x_test) if msg["eval_batches"] else 0,
                                   cfg.batch_size):
            x_batch = x_test[eval_offset : eval_offset + nb]
            eval_offset += nb
            forward_batch(x_batch)

    out["theta_share_b"] = None if theta_share is None else theta_share.values
    out["theta_b"] = theta_own
    out["triples_consumed_b"] = triples_consumed


# -- session runner ------------------------------------------------------------------------


@dataclass
class VerticalData:
    """Row-aligned vertically partitioned dataset (A holds the labels)."""

    x_a_train: np.ndarray
    x_b_train: np.ndarray
    y_train: np.ndarray
    x_a_test: np.ndarray
    x_b_test: np.ndarray
    y_test: np.ndarray

    def __post_init__(self):
        if not (len(self.x_a_train) == len(self.x_b_train) == len(self.y_train)):
            raise RowCountMismatch("train parts are not row-aligned")
        if not (len(self.x_a_test) == len(self.x_b_test) == len(self.y_test)):
            raise RowCountMismatch("test parts are not row-aligned")


@dataclass
class SessionResult:
    config: TrainConfig
    history: list
    theta: np.ndarray          # reconstructed first-layer weights (d x m)
    first_bias: np.ndarray
    stack: list                # server AffineLayers
    head: AffineLayer
    traffic: dict              # (src, dst, msg_type) -> wire bytes
    traffic_frames: dict       # (src, dst, msg_type) -> frame count
    link_stats: dict | None
    sim_seconds: float | None
    compute_seconds: float
    wall_seconds: float
    triples_dealt: int
    triples_consumed: int
    stop_reason: str

    def data_plane_bytes(self) -> int:
        """Bytes among clients and server (excludes coordinator links)."""
        return sum(v for (src, dst, _), v in self.traffic.items()
                   if COORDINATOR not in (src, dst))

    def data_plane_frames(self) -> int:
        return sum(v for (src, dst, _), v in self.traffic_frames.items()
                   if COORDINATOR not in (src, dst))

    def triple_bytes(self) -> int:
        return sum(v for (_, _, t), v in self.traffic.items() if t == "TRIPLE_DEAL")

    def triple_frames(self) -> int:
        return sum(v for (_, _, t), v in self.traffic_frames.items()
                   if t == "TRIPLE_DEAL")

    def coordinator_control_bytes(self) -> int:
        return sum(v for (src, dst, t), v in self.traffic.items()
                   if COORDINATOR in (src, dst) and t != "TRIPLE_DEAL")


def run_session(cfg: TrainConfig, data: VerticalData, tap=None) -> SessionResult:
    """Execute one full training session, one thread per role."""
    if data.x_a_train.shape[1] != cfg.d_a or data.x_b_train.shape[1] != cfg.d_b:
        raise ShapeMismatch("data column blocks do not match d_a / d_b")
    session_id = cfg.seed & (2**64 - 1) or 1

    network = None
    if cfg.transport == "sim":
        network = SimNetwork(NetworkConfig(bandwidth_bps=cfg.bandwidth_bps,
                                           latency_s=cfg.latency_s))
        endpoints = {role: SimEndpoint(network, role) for role in ROLES}
    else:
        if not cfg.endpoints:
            raise InvalidSpec("tcp transport requires role endpoints")
        endpoints = {}
        ep_lock = threading.Lock()

        def make_tcp(role):
            ep = TcpEndpoint(role, cfg.endpoints, session_id)
            with ep_lock:
                endpoints[role] = ep

        builders = [threading.Thread(target=make_tcp, args=(role,)) for role in ROLES]
        for b in builders:
            b.start()
        for b in builders:
            b.join()
        if len(endpoints) != len(ROLES):
            raise InvalidSpec("tcp endpoint setup failed")

    nodes = {role: ProtocolNode(endpoints[role], role, session_id, tap=tap)
             for role in ROLES}
    out: dict = {}
    errors: dict = {}

    def guard(role, fn, *args):
        try:
            fn(*args)
        except BaseException as exc:  # noqa: BLE001 - surfaced after join
            errors[role] = exc
            if network is not None:
                network.abort()
            else:
                for ep in endpoints.values():
                    ep.close()

    wall_start = time.perf_counter()
    threads = [
        threading.Thread(target=guard, args=(SERVER, _run_server, nodes[SERVER], cfg, out)),
        threading.Thread(target=guard, args=(
            CLIENT_A, _run_client_a, nodes[CLIENT_A], cfg,
            data.x_a_train, data.y_train, data.x_a_test, data.y_test, out)),
        threading.Thread(target=guard, args=(
            CLIENT_B, _run_client_b, nodes[CLIENT_B], cfg,
            data.x_b_train, data.x_b_test, out)),
    ]
    for t in threads:
        t.start()
    guard(COORDINATOR, _run_coordinator, nodes[COORDINATOR], cfg,
          len(data.y_train), len(data.y_test), out)
    for t in threads:
        t.join(timeout=600)
    wall_seconds = time.perf_counter() - wall_start
    if errors:
        # prefer the root cause over the LinkClosed/PeerClosed fallout of the abort
        primary = [e for e in errors.values() if not isinstance(e, (LinkClosed, PeerClosed))]
        raise (primary or list(errors.values()))[0]
    if cfg.transport == "tcp":
        for ep in endpoints.values():
            ep.close()

    codec = cfg.codec()
    if out.get("theta_share_a") is not None:
        theta = codec.decode(codec.add(out["theta_share_a"], out["theta_share_b"]))
    else:
        theta = np.vstack([out["theta_a"], out["theta_b"]])

    traffic = {}
    traffic_frames = {}
    for role, node in nodes.items():
        for (dst, msg_type), nbytes in node.sent_bytes.items():
            traffic[(role, dst, msg_type)] = nbytes
            traffic_frames[(role, dst, msg_type)] = node.sent_frames[(dst, msg_type)]
    return SessionResult(
        config=cfg,
        history=out["history"],
        theta=theta,
        first_bias=out["first_bias"],
        stack=out["stack"],
        head=out["head"],
        traffic=traffic,
        traffic_frames=traffic_frames,
        link_stats=network.stats() if network is not None else None,
        sim_seconds=network.now if network is not None else None,
        compute_seconds=sum(n.compute_seconds for n in nodes.values()),
        wall_seconds=wall_seconds,
        # both clients consume their halves of the same logical triple
        triples_dealt=out.get("triples_dealt", 0),
        triples_consumed=max(out.get("triples_consumed_a", 0),
                             out.get("triples_consumed_b", 0)),
        stop_reason=out["stop_reason"],
    )


# -- model evaluation on a trained partition ---------------------------------------------


def hidden_features(result: SessionResult, x_a: np.ndarray, x_b: np.ndarray) -> np.ndarray:
    """First hidden layer exactly as the server observes it (post activation),
    reproducing the fixed-point quantization of the configured backend."""
    cfg = result.config
    plan = split_graph(cfg)
    if cfg.exact_float:
        pre = np.concatenate([x_a, x_b], axis=1) @ result.theta
    elif cfg.protocol_mode == "he":
        codec = cfg.codec()
        pre = codec.decode(codec.truncate(codec.matmul(
            codec.encode(x_a), codec.encode(result.theta[: cfg.d_a]))))
        pre = pre + codec.decode(codec.truncate(codec.matmul(
            codec.encode(x_b), codec.encode(result.theta[cfg.d_a :]))))
    else:
        codec = cfg.codec()
        pre = codec.decode(codec.truncate(codec.matmul(
            codec.encode(np.concatenate([x_a, x_b], axis=1)),
            codec.encode(result.theta))))
    return activate(pre + result.first_bias, plan.first_activation)


def predict_proba(result: SessionResult, x_a: np.ndarray, x_b: np.ndarray) -> np.ndarray:
    h = hidden_features(result, x_a, x_b)
    if result.stack:
        h, _ = Mlp(result.stack).forward(h)
    return predict_head(h, result.head)


# -- standalone sub-protocol surfaces (exercised directly by tests) -------------------------


@dataclass
class FirstHiddenOutcome:
    pre_activation: np.ndarray   # what the server reconstructs, before bias/act
    share_a: np.ndarray | None   # server's received ring shares (ss only)
    share_b: np.ndarray | None
    client_link_bytes: int       # bytes exchanged between the two clients
    upstream_bytes: int          # bytes sent up to the server


def first_hidden_ss(x_a, x_b, theta_a, theta_b, codec: FixedPointCodec | None = None,
                    seed: int = 0) -> FirstHiddenOutcome:
    """Run the shared first-layer protocol standalone (fresh X and theta
    sharing, dealer triples) and reconstruct at a stand-in server."""
    codec = codec or FixedPointCodec()
    if x_a.shape[0] != x_b.shape[0]:
        raise RowCountMismatch(f"client batches disagree: {x_a.shape[0]} vs {x_b.shape[0]}")
    n = x_a.shape[0]
    d = x_a.shape[1] + x_b.shape[1]
    m = theta_a.shape[1]
    dealer = np.random.default_rng([seed, 7])
    first = gen_matmul_triple(codec, dealer, n, d, m)
    second = gen_matmul_triple(codec, dealer, n, d, m)
    ch0, ch1 = LocalChannel.make_pair()

    def party(idx, x_block, theta_block, ch, triples):
        rng = np.random.default_rng([seed, 5 + idx])
        theta_share = ShareMatrix(
            idx, share_exchange(idx, theta_block, ch, codec, rng, axis=0))
        prod, _ = client_first_hidden_ss(idx, x_block, theta_share, triples, ch,
                                         codec, rng)
        return prod

    prod_a, prod_b = run_pairwise(
        lambda: party(0, x_a, theta_a, ch0, (first[0], second[0])),
        lambda: party(1, x_b, theta_b, ch1, (first[1], second[1])),
    )
    up_bytes = 2 * len(matrix_to_bytes(prod_a, codec))
    return FirstHiddenOutcome(
        pre_activation=codec.decode(codec.add(prod_a, prod_b)),
        share_a=prod_a,
        share_b=prod_b,
        client_link_bytes=ch0.bytes_sent + ch1.bytes_sent,
        upstream_bytes=up_bytes,
    )


def first_hidden_he(x_a, x_b, theta_a, theta_b, keypair,
                    codec: FixedPointCodec | None = None, seed: int = 0) -> FirstHiddenOutcome:
    """Run the encrypt-add-decrypt first-layer pipeline standalone."""
    codec = codec or FixedPointCodec()
    if x_a.shape[0] != x_b.shape[0]:
        raise RowCountMismatch(f"client batches disagree: {x_a.shape[0]} vs {x_b.shape[0]}")
    encoder = SignedEncoder(keypair.pk.n, codec.frac_bits)
    rng_a, rng_b = random.Random(seed * 31 + 11), random.Random(seed * 31 + 13)
    n, m = x_a.shape[0], theta_a.shape[1]
    cts_a = [encrypt(keypair.pk, v, rng_a)
             for v in client_he_plaintexts(x_a, theta_a, codec, encoder)]
    payload_ab = cts_to_bytes(cts_a, n, m)
    plain_b = client_he_plaintexts(x_b, theta_b, codec, encoder)
    _, _, cts_a_rx = cts_from_bytes(payload_ab, keypair.pk)
    summed = [add_ct(ca, encrypt(keypair.pk, v, rng_b))
              for ca, v in zip(cts_a_rx, plain_b)]
    payload_up = cts_to_bytes(summed, n, m)
    pre = server_decrypt_hidden(payload_up, keypair, encoder)
    return FirstHiddenOutcome(
        pre_activation=pre,
        share_a=None,
        share_b=None,
        client_link_bytes=len(payload_ab),
        upstream_bytes=len(payload_up),
    )
