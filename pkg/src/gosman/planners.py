"""Action-selection policies.

Four policies are provided:

* ``ns``   -- nearest sensor: move towards the predicted mean.
* ``gd``   -- myopic minimisation of the one-step MSGOSPA bound.
* ``kl``   -- myopic maximisation of the expected information gain.
* ``mcts`` -- non-myopic Monte Carlo tree search over the discounted
  MSGOSPA bound, guided by the UCT rule.

An exhaustive finite-horizon Bellman solver over the same merged
belief dynamics serves as the correctness oracle for the MCTS: with an
exhausting budget and exhaustive continuation rollouts the tree search
recovers the exact optimum.

All detection probabilities used inside planning are importance-sampling
estimates whose random streams are keyed by the action path, so any two
planners evaluating the same action sequence in the same decision see
identical numbers.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from . import streams
from .bernoulli import (BernoulliDensity, Gaussian, LinearSensor, MotionModel,
                        predict, reduce)
from .costs import merge_hypotheses, node_cost, pseudo_update
from .gospa import POSITION_INDICES
from .sensors import (Action, Bounds, ObstacleMap, SensorState, enumerate_actions,
                      expected_pd, noise_matrix)

_BELLMAN_LEAF_GUARD = 1_000_000


@dataclass(frozen=True)
class PlanningEnv:
    """Everything a planner needs to know about the world."""

    motion: MotionModel
    obstacles: ObstacleMap
    bounds: Bounds
    fov_radius: float
    step_size: float
    num_actions: int
    p_detect: float
    H: np.ndarray
    r_low: float
    r_high: float
    c: float
    noise_classes: Optional[tuple] = None
    pos_indices: Sequence[int] = POSITION_INDICES
    pd_samples: int = 1000

    def sensor_at(self, position) -> SensorState:
        return SensorState(position, self.fov_radius, self.step_size,
                           self.num_actions, self.p_detect)

    def actions_from(self, position) -> list:
        return enumerate_actions(self.sensor_at(position), self.obstacles,
                                 self.bounds, self.noise_classes)

    def sensor_model(self, action: Action) -> LinearSensor:
        return LinearSensor(self.H, noise_matrix(action.noise_class,
                                                 self.r_low, self.r_high))

    def expected_pd_at(self, component: Gaussian, position, key: tuple) -> float:
        rng = streams.stream(*key)
        return expected_pd(component, self.sensor_at(position), self.pd_samples,
                           rng, self.pos_indices)


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 5
    discount: float = 0.7
    exploration: float = 0.05
    budget: int = 10
    rollout_depth: int = 10
    pd_samples: int = 1000
    root_rule: str = "mean"          # or "visits"
    rollout: str = "random"          # or "exhaustive" (oracle mode)

    def __post_init__(self):
        if self.horizon < 1 or self.budget < 1:
            raise ValueError("horizon and budget must be >= 1")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError(f"discount out of [0, 1]: {self.discount}")
        if self.exploration < 0.0:
            raise ValueError("exploration must be non-negative")


@dataclass(frozen=True)
class StepOutcome:
    cost: float
    merged: BernoulliDensity
    pd_bar: float


def evaluate_action(env: PlanningEnv, pred: BernoulliDensity, action: Action,
                    base_key: tuple, path: tuple) -> StepOutcome:
    """Cost and merged posterior of taking one action from a predicted density.

    ``path`` is the action-id sequence from the planning root; it keys
    the detection-probability sample stream.
    """
    pd_key = base_key + (streams.PLAN_PD,) + path
    pd_bar = env.expected_pd_at(pred.components[0], action.target_position, pd_key)
    pair = pseudo_update(pred, env.sensor_model(action), pd_bar)
    cost = node_cost(pair, env.c, env.pos_indices)
    return StepOutcome(cost, merge_hypotheses(pair), pd_bar)


def _predict_reduced(bel: BernoulliDensity, motion: MotionModel) -> BernoulliDensity:
    """Single-step prediction keeping only the highest-weighted component."""
    return reduce(predict(bel, motion), max_components=1)


# ---------------------------------------------------------------------------
# exhaustive Bellman oracle and the myopic special case


def exhaustive_bellman(root_density: BernoulliDensity, sensor_position, env: PlanningEnv,
                       horizon: int, discount: float,
                       base_key: tuple = (0,)) -> Tuple[Action, float]:
    """Exact finite-horizon minimisation over all action sequences.

    Both observation hypotheses are weighted into each step's expected
    cost and merge; the belief recursion is therefore deterministic and
    the optimum is found by plain enumeration. Guarded against horizons
    whose full expansion exceeds a million leaves.
    """
    n_actions = max(len(env.actions_from(sensor_position)), 1)
    if (n_actions ** horizon) * (2 ** horizon) > _BELLMAN_LEAF_GUARD:
        raise ValueError("exhaustive horizon too large to enumerate")
    value, action = _bellman_value(env, root_density, sensor_position, horizon,
                                   discount, base_key, path=(), predicted=True)
    return action, value


def _bellman_value(env, bel, position, steps_left, discount, base_key, path,
                   predicted):
    if steps_left == 0:
        return 0.0, None
    pred = bel if predicted else _predict_reduced(bel, env.motion)
    best_value = math.inf
    best_action = None
    for action in sorted(env.actions_from(position), key=lambda a: a.id):
        out = evaluate_action(env, pred, action, base_key, path + (action.id,))
        tail, _ = _bellman_value(env, out.merged, action.target_position,
                                 steps_left - 1, discount, base_key,
                                 path + (action.id,), predicted=False)
        value = out.cost + discount * tail
        if value < best_value - 1e-15:
            best_value = value
            best_action = action
    return best_value, best_action


def myopic_plan(root_density: BernoulliDensity, sensor_position, env: PlanningEnv,
                base_key: tuple = (0,)) -> Action:
    """Minimise the one-step expected MSGOSPA bound."""
    action, _ = exhaustive_bellman(root_density, sensor_position, env,
                                   horizon=1, discount=0.0, base_key=base_key)
    return action


# ---------------------------------------------------------------------------
# Monte Carlo tree search


class TreeNode:
    """One tree node: an action taken at a specific depth."""

    __slots__ = ("action", "parent", "children", "untried", "depth",
                 "sensor_position", "density", "immediate_cost", "pd_bar",
                 "visits", "mean_reward", "path")

    def __init__(self, action, parent, depth, sensor_position, density,
                 immediate_cost, pd_bar, untried, path):
        self.action = action
        self.parent = parent
        self.children = []
        self.untried = list(untried)
        self.depth = depth
        self.sensor_position = sensor_position
        self.density = density          # merged posterior (root: predicted)
        self.immediate_cost = immediate_cost
        self.pd_bar = pd_bar
        self.visits = 0
        self.mean_reward = 0.0
        self.path = path


def uct_select(node: TreeNode, exploration: float) -> TreeNode:
    """UCT child choice; ties broken by lowest action id."""
    best = None
    best_score = -math.inf
    for child in sorted(node.children, key=lambda ch: ch.action.id):
        score = child.mean_reward + 2.0 * exploration * math.sqrt(
            math.log(node.visits) / child.visits)
        if score > best_score + 1e-15:
            best_score = score
            best = child
    return best


def backpropagate(leaf: TreeNode, delta: float, rule: str = "mean") -> None:
    """Fold a simulation reward into every node on the root path.

    The reward update precedes the visit-count increment. ``rule="max"``
    keeps the best reward instead of the running mean (used by the
    exhaustive-continuation oracle mode).
    """
    node = leaf
    while node is not None:
        if rule == "max":
            node.mean_reward = delta if node.visits == 0 else max(node.mean_reward, delta)
        else:
            node.mean_reward = (node.mean_reward * node.visits + delta) / (node.visits + 1)
        node.visits += 1
        node = node.parent


@dataclass(frozen=True)
class MctsResult:
    action: Action
    value: float
    root: TreeNode


def mcts_search(root_density: BernoulliDensity, sensor_position, env: PlanningEnv,
                cfg: PlannerConfig, base_key: tuple = (0,)) -> MctsResult:
    """Grow a search tree within the node budget and pick the best root child."""
    sensor_position = np.asarray(sensor_position, dtype=float)
    depth_limit = min(cfg.horizon, cfg.rollout_depth)
    root = TreeNode(action=None, parent=None, depth=0,
                    sensor_position=sensor_position, density=root_density,
                    immediate_cost=0.0, pd_bar=None,
                    untried=env.actions_from(sensor_position), path=())
    tree_rng = streams.stream(*base_key, streams.PLAN_TREE)
    backup = "max" if cfg.rollout == "exhaustive" else "mean"

    for _ in range(cfg.budget):
        node = root
        while not node.untried and node.children:
            node = uct_select(node, cfg.exploration)
        if node.untried:
            node = _expand(env, node, tree_rng, base_key, depth_limit)
        delta = -_path_cost(node, cfg.discount)
        if node.depth < depth_limit:
            if cfg.rollout == "exhaustive":
                tail, _ = _bellman_value(env, node.density, node.sensor_position,
                                         depth_limit - node.depth, cfg.discount,
                                         base_key, node.path, predicted=False)
                delta -= cfg.discount ** node.depth * tail
            else:
                delta -= _random_rollout(env, node, depth_limit, cfg.discount,
                                         tree_rng, base_key)
        backpropagate(node, delta, backup)

    children = sorted(root.children, key=lambda ch: ch.action.id)
    if cfg.root_rule == "visits":
        best = max(children, key=lambda ch: (ch.visits, -ch.action.id))
    else:
        best = max(children, key=lambda ch: (ch.mean_reward, -ch.action.id))
    return MctsResult(best.action, best.mean_reward, root)


def mcts_plan(root_density: BernoulliDensity, sensor_position, env: PlanningEnv,
              cfg: PlannerConfig, base_key: tuple = (0,)) -> Action:
    return mcts_search(root_density, sensor_position, env, cfg, base_key).action


def _expand(env, node, tree_rng, base_key, depth_limit):
    idx = int(tree_rng.integers(len(node.untried)))
    action = node.untried.pop(idx)
    pred = node.density if node.depth == 0 else _predict_reduced(node.density,
                                                                env.motion)
    path = node.path + (action.id,)
    out = evaluate_action(env, pred, action, base_key, path)
    depth = node.depth + 1
    untried = env.actions_from(action.target_position) if depth < depth_limit else []
    child = TreeNode(action=action, parent=node, depth=depth,
                     sensor_position=action.target_position, density=out.merged,
                     immediate_cost=out.cost, pd_bar=out.pd_bar,
                     untried=untried, path=path)
    node.children.append(child)
    return child


def _path_cost(node: TreeNode, discount: float) -> float:
    """Discounted cost of the root path; the first action is undiscounted."""
    total = 0.0
    while node is not None and node.depth > 0:
        total += discount ** (node.depth - 1) * node.immediate_cost
        node = node.parent
    return total


def _random_rollout(env, node, depth_limit, discount, tree_rng, base_key) -> float:
    """Discounted cost of a random action continuation (nodes not kept)."""
    density = node.density
    position = node.sensor_position
    path = node.path
    total = 0.0
    for depth in range(node.depth, depth_limit):
        pred = _predict_reduced(density, env.motion)
        actions = env.actions_from(position)
        action = actions[int(tree_rng.integers(len(actions)))]
        path = path + (action.id,)
        out = evaluate_action(env, pred, action, base_key, path)
        total += discount ** depth * out.cost
        density = out.merged
        position = action.target_position
    return total


# ---------------------------------------------------------------------------
# baselines


def nearest_sensor_plan(root_density: BernoulliDensity, sensor_position,
                        env: PlanningEnv) -> Action:
    """Move to the feasible action closest to the predicted positional mean."""
    idx = list(env.pos_indices)
    mean = root_density.top_component.mean[idx] if root_density.components else \
        np.asarray(sensor_position, dtype=float)
    best = None
    best_d = math.inf
    for action in sorted(env.actions_from(sensor_position), key=lambda a: a.id):
        d = float(np.linalg.norm(action.target_position - mean))
        if d < best_d - 1e-12:
            best_d = d
            best = action
    return best


def kl_bernoulli_gaussian(posterior_r: float, posterior: Gaussian,
                          predicted_r: float, predicted: Gaussian) -> float:
    """Divergence between Bernoulli-Gaussian posterior and predicted densities.

    The closed form weights the existence terms by the predicted
    probability of existence; when either existence probability is
    degenerate (0 or 1) only the Gaussian term remains.
    """
    post_cov_inv = np.linalg.inv(posterior.cov)
    dm = posterior.mean - predicted.mean
    sign_pred, logdet_pred = np.linalg.slogdet(predicted.cov)
    sign_post, logdet_post = np.linalg.slogdet(posterior.cov)
    if sign_pred <= 0 or sign_post <= 0:
        raise np.linalg.LinAlgError("singular covariance in KL computation")
    gauss = 0.5 * (float(np.trace(post_cov_inv @ predicted.cov))
                   - (logdet_pred - logdet_post)
                   - len(dm)
                   + float(dm @ post_cov_inv @ dm))

    eps = 1e-12
    degenerate = (min(posterior_r, predicted_r) < eps
                  or max(posterior_r, predicted_r) > 1.0 - eps)
    if degenerate:
        return predicted_r * gauss
    existence = ((1.0 - predicted_r) * math.log((1.0 - predicted_r) / (1.0 - posterior_r))
                 + predicted_r * math.log(predicted_r / posterior_r))
    return existence + predicted_r * gauss


def kl_plan(root_density: BernoulliDensity, sensor_position, env: PlanningEnv,
            base_key: tuple = (0,), detect_only: bool = False) -> Action:
    """Maximise the expected information gain over the two observation branches."""
    g_pred = root_density.components[0]
    best = None
    best_score = -math.inf
    for action in sorted(env.actions_from(sensor_position), key=lambda a: a.id):
        pd_key = base_key + (streams.PLAN_PD, action.id)
        pd_bar = env.expected_pd_at(g_pred, action.target_position, pd_key)
        pair = pseudo_update(root_density, env.sensor_model(action), pd_bar)
        kl_detect = kl_bernoulli_gaussian(pair.detect_r, pair.detect,
                                          root_density.r, g_pred)
        if detect_only:
            score = kl_detect
        else:
            kl_miss = kl_bernoulli_gaussian(pair.miss_r, pair.miss,
                                            root_density.r, g_pred)
            p1 = pair.p_detect_event
            score = (1.0 - p1) * kl_miss + p1 * kl_detect
        if score > best_score + 1e-15:
            best_score = score
            best = action
    return best


# ---------------------------------------------------------------------------
# policy objects used by the simulator


class Policy:
    name = "policy"

    def plan(self, predicted: BernoulliDensity, sensor_position,
             step_key: tuple) -> Action:
        raise NotImplementedError


class NearestSensorPolicy(Policy):
    name = "ns"

    def __init__(self, env: PlanningEnv):
        self.env = env

    def plan(self, predicted, sensor_position, step_key):
        return nearest_sensor_plan(predicted, sensor_position, self.env)


class MyopicGospaPolicy(Policy):
    name = "gd"

    def __init__(self, env: PlanningEnv):
        self.env = env

    def plan(self, predicted, sensor_position, step_key):
        return myopic_plan(predicted, sensor_position, self.env, step_key)


class KlPolicy(Policy):
    name = "kl"

    def __init__(self, env: PlanningEnv, detect_only: bool = False):
        self.env = env
        self.detect_only = detect_only

    def plan(self, predicted, sensor_position, step_key):
        return kl_plan(predicted, sensor_position, self.env, step_key,
                       self.detect_only)


class MctsPolicy(Policy):
    name = "mcts"

    def __init__(self, env: PlanningEnv, cfg: PlannerConfig):
        self.env = env
        self.cfg = cfg

    def plan(self, predicted, sensor_position, step_key):
        return mcts_plan(predicted, sensor_position, self.env, self.cfg, step_key)


def make_policy(spec: dict, env: PlanningEnv) -> Policy:
    """Build a policy from a config mapping with a ``name`` field."""
    spec = dict(spec)
    name = spec.pop("name")
    spec.pop("label", None)
    if name == "ns":
        return NearestSensorPolicy(env)
    if name == "gd":
        return MyopicGospaPolicy(env)
    if name == "kl":
        return KlPolicy(env, detect_only=bool(spec.pop("detect_only", False)))
    if name == "mcts":
        cfg = PlannerConfig(**spec)
        if cfg.pd_samples != env.pd_samples:
            env = PlanningEnv(**{**env.__dict__, "pd_samples": cfg.pd_samples})
        return MctsPolicy(env, cfg)
    raise ValueError(f"unknown policy name: {name!r}")
