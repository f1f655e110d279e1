"""Edge-network scenario: services, UEs, network parameters.

All sizes are stored internally in bits (1 KB = 1e3 bytes, 1 MB = 1e6 bytes,
1 byte = 8 bits).  All frequencies are Hz, powers are W, times are seconds.
Generation is fully deterministic given (seed, config): replaying a seed
reproduces every field bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import yaml

from .errors import InfeasibilityError, InvalidParameterError

SCENARIO_FORMAT_VERSION = 1

BITS_PER_BYTE = 8
KB = 1e3 * BITS_PER_BYTE    # bits
MB = 1e6 * BITS_PER_BYTE    # bits
GHZ = 1e9
MHZ = 1e6


@dataclass(frozen=True)
class NetworkProfile:
    """Base-station / radio parameters shared by all UEs."""

    uplink_bandwidth: float = 20 * MHZ      # Hz
    downlink_bandwidth: float = 20 * MHZ    # Hz
    noise_power: float = 1e-10              # W
    bs_power: float = 40.0                  # W
    reference_gain: float = 1e-4            # linear (-40 dB)
    reference_distance: float = 1.0         # m

    def __post_init__(self):
        for name in ("uplink_bandwidth", "downlink_bandwidth", "noise_power",
                     "bs_power", "reference_gain", "reference_distance"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"NetworkProfile.{name} must be > 0")


@dataclass(frozen=True)
class UEProfile:
    """One device: radio link and compute capability.

    mem_overhead / comm_overhead carry one entry per service (seconds).
    """

    id: int
    distance: float             # m
    channel_gain: float         # linear
    tx_power: float             # W
    cpu_total: float            # Hz
    capacitance: float          # effective capacitance coefficient beta_n
    mem_overhead: tuple = ()    # s, per service
    comm_overhead: tuple = ()   # s, per service

    def __post_init__(self):
        if self.cpu_total <= 0 or self.tx_power <= 0:
            raise InvalidParameterError("UE cpu_total and tx_power must be > 0")
        if self.channel_gain <= 0 or self.capacitance <= 0:
            raise InvalidParameterError("UE channel_gain and capacitance must be > 0")
        if any(t < 0 for t in self.mem_overhead) or any(t < 0 for t in self.comm_overhead):
            raise InvalidParameterError("per-service overheads must be >= 0")


@dataclass(frozen=True)
class ServiceProfile:
    """One FL service: learning target and per-UE workload."""

    id: int
    update_size: float          # bits (v_s)
    cycles_per_bit: float       # cycles/bit (c_s)
    local_accuracy: float       # theta_s in (0, 1)
    tradeoff_weight: float      # kappa_s, W-equivalent per second
    round_scale: float = 1.0    # A_s multiplier on the global-round count
    avg_time: float = 0.0       # s, server-side averaging time
    data_sizes: tuple = ()      # bits, one entry per UE
    cpu_min: float = 0.1 * GHZ  # Hz

    def __post_init__(self):
        if not 0 < self.local_accuracy < 1:
            raise InvalidParameterError("local_accuracy must lie in (0, 1)")
        if self.update_size <= 0 or self.cycles_per_bit <= 0:
            raise InvalidParameterError("update_size and cycles_per_bit must be > 0")
        if self.tradeoff_weight < 0 or self.round_scale <= 0 or self.cpu_min <= 0:
            raise InvalidParameterError("tradeoff_weight >= 0, round_scale > 0, cpu_min > 0 required")
        if any(d < 0 for d in self.data_sizes):
            raise InvalidParameterError("data_sizes entries must be >= 0")


@dataclass(frozen=True)
class LearningGlobals:
    """Smoothness/convexity constants of the local losses."""

    smoothness: float = 1.0         # L
    strong_convexity: float = 0.5   # beta
    rate_gamma: float = 1.0         # gamma of the assumed local linear rate
    rate_c: float = 1.0             # c of the assumed local linear rate

    def __post_init__(self):
        if not self.smoothness >= self.strong_convexity > 0:
            raise InvalidParameterError("need L >= beta > 0")
        if not 0 < self.rate_gamma <= 1 or self.rate_c <= 0:
            raise InvalidParameterError("need 0 < gamma <= 1 and c > 0")

    @property
    def condition_number(self) -> float:
        return self.smoothness / self.strong_convexity


@dataclass(frozen=True)
class Scenario:
    network: NetworkProfile
    ues: tuple          # of UEProfile
    services: tuple     # of ServiceProfile
    learning: LearningGlobals
    bandwidth_min: float = 0.001
    seed: int = 0

    def __post_init__(self):
        n, s = len(self.ues), len(self.services)
        if n < 1 or s < 1:
            raise InvalidParameterError("need at least one UE and one service")
        max_cpu_min = max(svc.cpu_min for svc in self.services)
        min_cpu_tot = min(ue.cpu_total for ue in self.ues)
        if s * max_cpu_min > min_cpu_tot:
            raise InfeasibilityError(
                "shared-CPU constraint infeasible: "
                f"S * max(cpu_min) = {s * max_cpu_min:.3e} Hz exceeds "
                f"min(cpu_total) = {min_cpu_tot:.3e} Hz")
        if n * self.bandwidth_min > 1.0:
            raise InfeasibilityError(
                "shared-bandwidth constraint infeasible: "
                f"N * bandwidth_min = {n * self.bandwidth_min:.4f} > 1")
        for svc in self.services:
            if len(svc.data_sizes) != n:
                raise InvalidParameterError(
                    f"service {svc.id} has {len(svc.data_sizes)} data sizes for {n} UEs")
        for ue in self.ues:
            if len(ue.mem_overhead) != s or len(ue.comm_overhead) != s:
                raise InvalidParameterError(
                    f"UE {ue.id} overhead vectors must have one entry per service")

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def n_services(self) -> int:
        return len(self.services)

    def cpu_totals(self) -> np.ndarray:
        return np.array([ue.cpu_total for ue in self.ues])

    def data_matrix(self) -> np.ndarray:
        """(S, N) matrix of per-service, per-UE dataset sizes in bits."""
        return np.array([svc.data_sizes for svc in self.services])


@dataclass
class ScenarioConfig:
    """Distribution settings and service defaults for generation.

    Defaults reproduce the evaluation settings: 3 services with
    v in {100, 200, 300} KB, c in {50, 70, 90} cycles/bit,
    theta in {0.07, 0.06, 0.05}, kappa = 0.2 each.
    """

    # network
    uplink_bandwidth: float = 20 * MHZ
    downlink_bandwidth: float = 20 * MHZ
    noise_power: float = 1e-10
    bs_power: float = 40.0
    reference_gain: float = 1e-4
    reference_distance: float = 1.0
    # UE distributions
    distance_range: tuple = (2.0, 50.0)         # m
    cpu_total_range: tuple = (1 * GHZ, 2 * GHZ)
    data_size_range: tuple = (10 * MB, 20 * MB)  # bits per (service, UE)
    tx_power: float = 10.0
    capacitance: float = 2e-28
    mem_overhead: float = 0.0
    comm_overhead: float = 0.0
    # services
    update_sizes: tuple = (100 * KB, 200 * KB, 300 * KB)
    cycles_per_bit: tuple = (50.0, 70.0, 90.0)
    local_accuracies: tuple = (0.07, 0.06, 0.05)
    tradeoff_weights: tuple = (0.2, 0.2, 0.2)
    round_scales: tuple = (1.0, 1.0, 1.0)
    avg_times: tuple = (0.0, 0.0, 0.0)
    cpu_min: float = 0.1 * GHZ
    # learning globals
    smoothness: float = 1.0
    strong_convexity: float = 0.5
    rate_gamma: float = 1.0
    rate_c: float = 1.0
    # misc
    bandwidth_min: float = 0.001

    @property
    def n_services(self) -> int:
        return len(self.update_sizes)

    def __post_init__(self):
        s = self.n_services
        for name in ("cycles_per_bit", "local_accuracies", "tradeoff_weights",
                     "round_scales", "avg_times"):
            if len(getattr(self, name)) != s:
                raise InvalidParameterError(
                    f"ScenarioConfig.{name} must have {s} entries (one per service)")

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        """Read a config from a YAML file.

        Schema (all keys optional):
          network.{uplink_bandwidth, downlink_bandwidth, noise_power,
                   bs_power, reference_gain, reference_distance}
          ue_distribution.{distance_range, cpu_total_range, data_size_range,
                           tx_power, capacitance, mem_overhead, comm_overhead}
          service: list of {update_size, cycles_per_bit, local_accuracy,
                            tradeoff_weight, round_scale, avg_time}
          learning.{smoothness, strong_convexity, rate_gamma, rate_c}
          cpu_min, bandwidth_min
        """
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        kwargs = {}
        for key in ("uplink_bandwidth", "downlink_bandwidth", "noise_power",
                    "bs_power", "reference_gain", "reference_distance"):
            if key in raw.get("network", {}):
                kwargs[key] = float(raw["network"][key])
        ue = raw.get("ue_distribution", {})
        for key in ("tx_power", "capacitance", "mem_overhead", "comm_overhead"):
            if key in ue:
                kwargs[key] = float(ue[key])
        for key in ("distance_range", "cpu_total_range", "data_size_range"):
            if key in ue:
                kwargs[key] = tuple(float(v) for v in ue[key])
        if "service" in raw:
            svcs = raw["service"]
            kwargs["update_sizes"] = tuple(float(s["update_size"]) for s in svcs)
            kwargs["cycles_per_bit"] = tuple(float(s["cycles_per_bit"]) for s in svcs)
            kwargs["local_accuracies"] = tuple(float(s["local_accuracy"]) for s in svcs)
            kwargs["tradeoff_weights"] = tuple(float(s.get("tradeoff_weight", 0.2)) for s in svcs)
            kwargs["round_scales"] = tuple(float(s.get("round_scale", 1.0)) for s in svcs)
            kwargs["avg_times"] = tuple(float(s.get("avg_time", 0.0)) for s in svcs)
        learn = raw.get("learning", {})
        for key in ("smoothness", "strong_convexity", "rate_gamma", "rate_c"):
            if key in learn:
                kwargs[key] = float(learn[key])
        for key in ("cpu_min", "bandwidth_min"):
            if key in raw:
                kwargs[key] = float(raw[key])
        return cls(**kwargs)


def channel_gain_sample(distance: float, network: NetworkProfile,
                        rng: np.random.Generator) -> float:
    """One channel-gain draw: exponential with mean g0 * (d0 / d)^4."""
    if distance <= 0:
        raise InvalidParameterError(f"distance must be > 0, got {distance}")
    if distance < network.reference_distance:
        raise InvalidParameterError(
            f"distance {distance} m is below the reference distance "
            f"{network.reference_distance} m")
    mean = network.reference_gain * (network.reference_distance / distance) ** 4
    draw = rng.exponential(mean)
    # exponential(mean) can underflow to 0.0 only for mean == 0, excluded above
    return float(draw)


def generate_scenario(seed: int, n_ues: int,
                      config: ScenarioConfig | None = None) -> Scenario:
    """Generate a seeded scenario.

    Draw order is fixed (distances, CPU totals, per-service data sizes,
    channel gains) so a seed replay is bit-identical.
    """
    if n_ues < 1:
        raise InvalidParameterError("n_ues must be >= 1")
    config = config or ScenarioConfig()
    rng = np.random.default_rng(seed)
    network = NetworkProfile(
        uplink_bandwidth=config.uplink_bandwidth,
        downlink_bandwidth=config.downlink_bandwidth,
        noise_power=config.noise_power,
        bs_power=config.bs_power,
        reference_gain=config.reference_gain,
        reference_distance=config.reference_distance,
    )
    s = config.n_services
    distances = rng.uniform(*config.distance_range, size=n_ues)
    cpu_totals = rng.uniform(*config.cpu_total_range, size=n_ues)
    data = rng.uniform(*config.data_size_range, size=(s, n_ues))
    gains = np.array([channel_gain_sample(d, network, rng) for d in distances])

    ues = tuple(
        UEProfile(id=n, distance=float(distances[n]), channel_gain=float(gains[n]),
                  tx_power=config.tx_power, cpu_total=float(cpu_totals[n]),
                  capacitance=config.capacitance,
                  mem_overhead=(config.mem_overhead,) * s,
                  comm_overhead=(config.comm_overhead,) * s)
        for n in range(n_ues))
    services = tuple(
        ServiceProfile(id=i, update_size=config.update_sizes[i],
                       cycles_per_bit=config.cycles_per_bit[i],
                       local_accuracy=config.local_accuracies[i],
                       tradeoff_weight=config.tradeoff_weights[i],
                       round_scale=config.round_scales[i],
                       avg_time=config.avg_times[i],
                       data_sizes=tuple(float(d) for d in data[i]),
                       cpu_min=config.cpu_min)
        for i in range(s))
    learning = LearningGlobals(config.smoothness, config.strong_convexity,
                               config.rate_gamma, config.rate_c)
    return Scenario(network=network, ues=ues, services=services,
                    learning=learning, bandwidth_min=config.bandwidth_min,
                    seed=seed)


def scenario_to_yaml(scenario: Scenario) -> str:
    """Serialize a scenario to a versioned YAML document."""
    doc = {
        "format_version": SCENARIO_FORMAT_VERSION,
        "seed": scenario.seed,
        "bandwidth_min": scenario.bandwidth_min,
        "network": asdict(scenario.network),
        "learning": asdict(scenario.learning),
        "services": [asdict(svc) | {"data_sizes": list(svc.data_sizes)}
                     for svc in scenario.services],
        "ues": [asdict(ue) | {"mem_overhead": list(ue.mem_overhead),
                              "comm_overhead": list(ue.comm_overhead)}
                for ue in scenario.ues],
    }
    return yaml.safe_dump(doc, sort_keys=True)


def scenario_from_yaml(text: str) -> Scenario:
    doc = yaml.safe_load(text)
    version = doc.get("format_version")
    if version != SCENARIO_FORMAT_VERSION:
        raise InvalidParameterError(
            f"unsupported scenario document version: {version}")
    network = NetworkProfile(**doc["network"])
    learning = LearningGlobals(**doc["learning"])
    services = tuple(
        ServiceProfile(**(svc | {"data_sizes": tuple(svc["data_sizes"])}))
        for svc in doc["services"])
    ues = tuple(
        UEProfile(**(ue | {"mem_overhead": tuple(ue["mem_overhead"]),
                           "comm_overhead": tuple(ue["comm_overhead"])}))
        for ue in doc["ues"])
    return Scenario(network=network, ues=ues, services=services,
                    learning=learning, bandwidth_min=doc["bandwidth_min"],
                    seed=doc["seed"])


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        fh.write(scenario_to_yaml(scenario))


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_yaml(fh.read())
