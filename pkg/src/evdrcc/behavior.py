"""EV owner populations and PROMETHEE-driven charging-station switching.

Each owner starts at a home station, scores every station on charging price,
congestion time and habitual bias, and moves to the station with the highest
net outranking flow (staying home on ties).  Repeating this over freshly drawn
populations yields the demand scenarios from which the moments are estimated.
"""

from dataclasses import dataclass, field

import numpy as np

from . import promethee
from ._validation import check_random_state, check_vector

CRITERIA = ("price", "congestion", "bias")
DIRECTIONS = ("minimize", "minimize", "maximize")


@dataclass(frozen=True)
class Owner:
    id: int
    home_station: int
    weights: np.ndarray
    thresholds: promethee.PreferenceThresholds
    bias_strength: float
    beta: float


@dataclass(frozen=True)
class PopulationConfig:
    """Sampling ranges for owner attributes.

    ``arrivals`` holds the expected number of owners whose home is each
    station; with ``poisson`` set the realized counts are Poisson draws.
    Per-criterion ranges are ``(low, high)`` pairs in :data:`CRITERIA` order.
    ``tau_gap`` is the range of ``tau_p - tau_q``.
    """

    arrivals: tuple
    ch_avg: float = 0.05
    service_minutes: float = 30.0
    poisson: bool = True
    weight_range: tuple = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    tau_q_range: tuple = ((0.0, 0.02), (0.0, 5.0), (0.0, 0.2))
    tau_gap: tuple = ((0.02, 0.10), (5.0, 20.0), (0.2, 1.0))
    bias_range: tuple = (0.0, 1.0)
    beta_range: tuple = (0.1, 0.3)

    def __post_init__(self):
        if len(self.arrivals) == 0 or np.any(np.asarray(self.arrivals) < 0):
            raise ValueError("arrivals must be a non-empty nonnegative vector")
        if self.ch_avg <= 0:
            raise ValueError("ch_avg must be positive")
        if self.service_minutes < 0:
            raise ValueError("service_minutes must be nonnegative")
        for name in ("weight_range", "tau_q_range", "tau_gap"):
            rng = np.asarray(getattr(self, name), dtype=float)
            if rng.shape != (len(CRITERIA), 2) or np.any(rng[:, 0] > rng[:, 1]) or np.any(rng < 0):
                raise ValueError(f"{name}: expected {len(CRITERIA)} (low, high) pairs with 0 <= low <= high")
        if np.any(np.asarray(self.tau_gap)[:, 0] <= 0):
            raise ValueError("tau_gap: tau_p range must lie strictly above the tau_q range")
        for name in ("bias_range", "beta_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ValueError(f"{name}: expected 0 <= low <= high")

    @property
    def mean_beta(self):
        return 0.5 * (self.beta_range[0] + self.beta_range[1])


@dataclass(frozen=True, eq=False)
class OwnerPopulation:
    """Owner attributes stored column-wise (one row per owner)."""

    home: np.ndarray
    weights: np.ndarray
    tau_q: np.ndarray
    tau_p: np.ndarray
    bias_strength: np.ndarray
    beta: np.ndarray
    ch_avg: float
    n_stations: int

    def __post_init__(self):
        if self.ch_avg <= 0:
            raise ValueError("ch_avg must be positive")
        if np.any((self.home < 0) | (self.home >= self.n_stations)):
            raise ValueError("home station out of range")

    def __len__(self):
        return self.home.shape[0]

    @property
    def home_counts(self):
        return np.bincount(self.home, minlength=self.n_stations)

    @property
    def owners(self):
        return [Owner(y, int(self.home[y]), self.weights[y],
                      promethee.PreferenceThresholds(self.tau_q[y], self.tau_p[y]),
                      float(self.bias_strength[y]), float(self.beta[y]))
                for y in range(len(self))]


@dataclass(frozen=True)
class StationState:
    station: int
    price: float
    occupancy: int
    congestion_minutes: float

    def __post_init__(self):
        if self.occupancy < 0 or self.congestion_minutes < 0:
            raise ValueError("occupancy and congestion must be nonnegative")


@dataclass(frozen=True, eq=False)
class Scenario:
    counts: np.ndarray
    p_ev: np.ndarray
    delta: np.ndarray = field(repr=False)


def sample_population(cfg, seed=None):
    """Draw an owner population; identical seeds give identical populations."""
    rng = check_random_state(seed)
    arrivals = np.asarray(cfg.arrivals, dtype=float)
    counts = rng.poisson(arrivals) if cfg.poisson else np.rint(arrivals).astype(int)
    n = int(counts.sum())
    if n == 0:
        raise ValueError("empty population")
    m = len(CRITERIA)
    home = np.repeat(np.arange(arrivals.shape[0]), counts)

    wr = np.asarray(cfg.weight_range, dtype=float)
    raw = rng.uniform(wr[:, 0], wr[:, 1], size=(n, m))
    total = raw.sum(axis=1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("weight ranges allow an all-zero weight vector")
    weights = raw / total

    qr = np.asarray(cfg.tau_q_range, dtype=float)
    gr = np.asarray(cfg.tau_gap, dtype=float)
    tau_q = rng.uniform(qr[:, 0], qr[:, 1], size=(n, m))
    tau_p = tau_q + rng.uniform(gr[:, 0], gr[:, 1], size=(n, m))
    bias = rng.uniform(*cfg.bias_range, size=n)
    beta = rng.uniform(*cfg.beta_range, size=n)
    return OwnerPopulation(home=home, weights=weights, tau_q=tau_q, tau_p=tau_p,
                           bias_strength=bias, beta=beta, ch_avg=cfg.ch_avg,
                           n_stations=arrivals.shape[0])


def congestion_minutes(occupancy, chargers, service_minutes):
    """Queue proxy: vehicles per charger times the mean service time."""
    occupancy = np.asarray(occupancy, dtype=float)
    return occupancy / np.asarray(chargers, dtype=float) * service_minutes


def station_states(prices, occupancy, chargers, service_minutes):
    t = congestion_minutes(occupancy, chargers, service_minutes)
    return [StationState(i, float(p), int(o), float(c))
            for i, (p, o, c) in enumerate(zip(prices, occupancy, t))]


def _state_arrays(states):
    price = np.array([s.price for s in states], dtype=float)
    cong = np.array([s.congestion_minutes for s in states], dtype=float)
    return price, cong


def station_performance(states, owner):
    """Benefit-oriented performance table (stations x criteria) seen by one owner."""
    price, cong = _state_arrays(states)
    bias = np.zeros(len(states))
    bias[owner.home_station] = owner.bias_strength
    return promethee.orient(np.column_stack([price, cong, bias]), DIRECTIONS)


def _performance_tensor(states, pop):
    price, cong = _state_arrays(states)
    n = len(states)
    G = np.empty((len(pop), n, len(CRITERIA)))
    G[:, :, 0] = -price
    G[:, :, 1] = -cong
    G[:, :, 2] = 0.0
    G[np.arange(len(pop)), pop.home, 2] = pop.bias_strength
    return G


def decide(pop, states):
    """Chosen station index for every owner."""
    if len(states) != pop.n_stations:
        raise ValueError(f"{len(states)} station states for {pop.n_stations} stations")
    if pop.n_stations == 1:
        return pop.home.copy()
    G = _performance_tensor(states, pop)
    flows = promethee.net_flows(G, pop.weights, pop.tau_q, pop.tau_p)
    return promethee.select_best(flows, pop.home)


def simulate_scenario(pop, states):
    """One switching pass of every owner against the given station states."""
    choice = decide(pop, states)
    n = pop.n_stations
    delta = np.zeros((len(pop), n), dtype=np.int8)
    delta[np.arange(len(pop)), choice] = 1
    counts = delta.sum(axis=0).astype(int)
    return Scenario(counts=counts, p_ev=counts * pop.ch_avg, delta=delta)


def scenario_rng(seed, index):
    """Independent stream for scenario ``index`` under master ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


def simulate_scenarios(cfg, prices, chargers, n_scenarios, seed, return_populations=False):
    """Draw ``n_scenarios`` populations and simulate their station choices.

    Congestion is computed once per scenario from the home (pre-switching)
    occupancy.
    """
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be positive")
    scenarios, pops = [], []
    for k in range(n_scenarios):
        pop = sample_population(cfg, scenario_rng(seed, k))
        states = station_states(prices, pop.home_counts, chargers, cfg.service_minutes)
        scenarios.append(simulate_scenario(pop, states))
        pops.append(pop)
    return (scenarios, pops) if return_populations else scenarios


def realized_demand(pop, scenario, prices, lambda_ref):
    """Station demand (MW) when every owner adjusts its own charge to the price gap."""
    per_vehicle = _charge_per_vehicle(pop.ch_avg, pop.beta,
                                      (np.asarray(prices) - np.asarray(lambda_ref))[None, :])
    return np.sum(scenario.delta * per_vehicle, axis=0)


def _charge_per_vehicle(ch_avg, beta, dlam):
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None]
    return np.clip(ch_avg - beta * dlam, 0.0, 2.0 * ch_avg)


def price_adjusted_mean(n_bar, prices, lambda_ref, ch_avg, beta):
    """Expected station demand (MW) under a linear price response.

    Each of the ``n_bar[i]`` vehicles draws ``ch_avg - beta * (prices[i] -
    lambda_ref[i])``, clamped to ``[0, 2 ch_avg]``; ``beta`` is the
    population-mean sensitivity.
    """
    n_bar = check_vector(n_bar, "n_bar", nonnegative=True)
    dlam = check_vector(prices, "prices", size=n_bar.shape[0]) - \
        check_vector(lambda_ref, "lambda_ref", size=n_bar.shape[0])
    return n_bar * np.clip(ch_avg - float(beta) * dlam, 0.0, 2.0 * ch_avg)


def mean_counts(scenarios):
    """Average post-switching vehicle count per station."""
    if not scenarios:
        raise ValueError("no scenarios")
    return np.mean([s.counts for s in scenarios], axis=0)
