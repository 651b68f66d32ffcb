"""Deterministic blind collection protocols for the five tasks.

Every controller acts only on percepts and the proprioception echo (never
on hidden world state), mirrors the collection rules the demonstrations
were gathered under (e.g. open the right bowl first, stop if found,
otherwise open the left; rotate the chassis clockwise to scan), and dwells
for the label window after each sub-task resolves so suffix annotation
lines up with resolution.

Two surfaces are provided: `scripted_policy` returns a macro-level
protocol (history, observation) -> MacroAction for the oracle world, and
`ScriptedController` emits continuous command frames for the recorder and
for the chunk-emitter wrapper used by the deployment loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..config import LabConfig
from ..dataspace import ACTION_DIM, action_from_poses
from ..geometry import MountCalibration, Pose, Rotation, aggregate_head, rot_y, rot_z, wrap_angle
from ..world.entities import ContinuousCommand, MacroAction, Observation

HOME_LEFT = np.array([0.35, 0.18, 0.95])
HOME_RIGHT = np.array([0.35, -0.18, 0.95])
SCAN_AMPLITUDE = 1.25
SCAN_RATE = 1.1          # rad/s head sweep
TABLE_PITCH = 0.55
DROP_POINT = np.array([0.55, 0.15, 0.80])   # bottle task table drop zone


@dataclass
class ScriptedStep:
    cmd: ContinuousCommand
    score: float
    mark: bool = False
    done: bool = False


@dataclass
class _Estimate:
    position: np.ndarray
    quality: float = 0.0
    open_flag: bool | None = None
    kind: str = ""
    age: float = 0.0


def _clamp(v, lo, hi):
    return min(hi, max(lo, v))


class ScriptedController:
    """Continuous-command protocol driver for one episode."""

    def __init__(self, kind: str, cfg: LabConfig, seed: int,
                 search_only: bool = False):
        self.kind = kind
        self.cfg = cfg
        self.search_only = search_only
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5C]))
        self.calib = MountCalibration(z_fixed=cfg.geometry.z_fixed)
        self.reset()

    def reset(self):
        self.t = 0.0
        self.est: dict[str, _Estimate] = {}
        self.phase = {
            "croissant": "scan",
            "cylinder": "reach_cover",
            "bottle": "reach_cabinet",
            "cans": "pick_first",
            "ringpeg": "assess",
        }[self.kind]
        self.scan_dir = 1 if self.rng.random() < 0.5 else -1
        self.dwell_s = 3.0 + self.rng.uniform(0.05, 0.35)
        self.dwell_left = 0.0
        self.active_cover = "bowl_right"
        self.hand = "right"
        self.grip = {"left": None, "right": None}
        self.head_target = [None, None]     # pitch, yaw
        self.eff_target = {"left": None, "right": None}
        self.base_cmd = [0.0, 0.0]
        self.score = 0.0
        self.settle = 0.0

    # -- shared plumbing ------------------------------------------------------

    def _update_estimates(self, obs: Observation, dt: float):
        head = aggregate_head_from_proprio(obs.proprio, self.calib)
        for e in self.est.values():
            e.age += dt
        for p in obs.percepts:
            world = head.transform_point(p.position)
            prev = self.est.get(p.entity_id)
            if prev is None:
                self.est[p.entity_id] = _Estimate(world, p.quality, p.open_flag, p.kind)
            else:
                prev.position = 0.5 * prev.position + 0.5 * world
                prev.quality = p.quality
                prev.open_flag = p.open_flag
                prev.age = 0.0
        return head

    def _gaze_at(self, obs: Observation, entity_id: str):
        """Track a percept: move gaze toward its bearing and elevation."""
        head = obs.proprio["head"]
        for p in obs.percepts:
            if p.entity_id == entity_id:
                x, y, z = (float(v) for v in p.position)
                bearing = math.atan2(y, x)
                elev = math.atan2(z, math.hypot(x, y))
                self.head_target = [head[0] - elev, head[1] + bearing]
                return True
        est = self.est.get(entity_id)
        if est is not None:
            pose = aggregate_head_from_proprio(obs.proprio, self.calib)
            rel = pose.inverse().transform_point(est.position)
            bearing = math.atan2(rel[1], rel[0])
            elev = math.atan2(rel[2], math.hypot(rel[0], rel[1]))
            self.head_target = [head[0] - elev, head[1] + bearing]
            return True
        return False

    def _off_axis(self, obs: Observation, entity_id: str):
        for p in obs.percepts:
            if p.entity_id == entity_id:
                d = float(np.linalg.norm(p.position))
                if d < 1e-9:
                    return 0.0
                return math.acos(_clamp(float(p.position[0]) / d, -1.0, 1.0))
        return None

    def _scan(self, obs: Observation):
        """Triangle sweep of the head yaw between the two extremes."""
        yaw = obs.proprio["head"][1]
        if yaw >= SCAN_AMPLITUDE - 0.05:
            self.scan_dir = -1
        elif yaw <= -SCAN_AMPLITUDE + 0.05:
            self.scan_dir = 1
        self.head_target = [TABLE_PITCH, self.scan_dir * SCAN_AMPLITUDE]

    def _held(self, obs: Observation, hand: str):
        return obs.proprio["held"][hand]

    def _near(self, obs: Observation, hand: str, point, tol: float):
        eff = np.asarray(obs.proprio[f"eff_{hand}"])
        return float(np.linalg.norm(eff - np.asarray(point))) <= tol

    def _cmd(self) -> ContinuousCommand:
        return ContinuousCommand(
            base_v=self.base_cmd[0], base_w=self.base_cmd[1],
            head_pitch=self.head_target[0], head_yaw=self.head_target[1],
            eff_left=self.eff_target["left"], eff_right=self.eff_target["right"],
            grip_left_w=self.grip["left"], grip_right_w=self.grip["right"],
        )

    def step(self, obs: Observation, dt: float) -> ScriptedStep:
        self.t += dt
        self.base_cmd = [0.0, 0.0]
        self._update_estimates(obs, dt)
        handler = getattr(self, f"_step_{self.kind}")
        return handler(obs, dt)

    def _dwell(self, dt: float, next_phase: str, mark: bool = True):
        """Hold with score 1 for the label window, then advance."""
        self.score = 1.0
        self.dwell_left -= dt
        if self.dwell_left <= 0.0:
            self.phase = next_phase
            self.dwell_s = 3.0 + self.rng.uniform(0.05, 0.35)
            return ScriptedStep(self._cmd(), 1.0, mark=mark,
                                done=(next_phase == "done"))
        return ScriptedStep(self._cmd(), 1.0)

    def _start_dwell(self):
        self.dwell_left = self.dwell_s

    # -- croissant: head scan, center, pick and place -------------------------

    def _step_croissant(self, obs: Observation, dt: float):
        w_max = self.cfg.world.w_max
        if self.phase == "scan":
            self.score = 0.0
            if obs.percept_for("croissant") is not None:
                self.phase = "center"
            else:
                self._scan(obs)
                return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "center":
            off = self._off_axis(obs, "croissant")
            if off is None and "croissant" not in self.est:
                self.phase = "scan"
                return ScriptedStep(self._cmd(), 0.0)
            if off is None:
                # lost it (perturbation): resume scanning after a beat
                self.settle += dt
                if self.settle > 0.4:
                    self.settle = 0.0
                    self.est.pop("croissant", None)
                    self.phase = "scan"
                self._gaze_at(obs, "croissant")
                return ScriptedStep(self._cmd(), 0.0)
            self.settle = 0.0
            self._gaze_at(obs, "croissant")
            if off <= 0.6 * self.cfg.world.eps_center:
                if self.search_only:
                    return ScriptedStep(self._cmd(), 1.0)
                self._start_dwell()
                self.phase = "search_dwell"
            return ScriptedStep(self._cmd(), 1.0 if off <= self.cfg.world.eps_center else 0.0)
        if self.phase == "search_dwell":
            if obs.percept_for("croissant") is None and self.search_only:
                self.phase = "scan"
                return ScriptedStep(self._cmd(), 0.0)
            self._gaze_at(obs, "croissant")
            return self._dwell(dt, "reach")
        if self.phase == "reach":
            self.score = 0.0
            target = self.est["croissant"].position
            self.hand = "left" if target[1] > 0 else "right"
            self.eff_target[self.hand] = target
            self.grip[self.hand] = w_max
            self._gaze_at(obs, "croissant")
            if self._near(obs, self.hand, target, 0.05):
                self.phase = "grasp"
                self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "grasp":
            self.settle += dt
            self._gaze_at(obs, "croissant")
            if self.settle > 0.35:
                self.grip[self.hand] = 0.0
            if self._held(obs, self.hand) == "croissant" and self.settle > 0.8:
                self.phase = "carry"
                self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "carry":
            plate = self.est.get("plate")
            goal = plate.position if plate else np.array([0.70, 0.0, 0.80])
            above = goal + np.array([0.0, 0.0, 0.12])
            self.eff_target[self.hand] = above
            self._gaze_at(obs, "plate")
            if self._near(obs, self.hand, above, 0.05):
                self.settle += dt
                if self.settle > 0.4:
                    self.phase = "release"
                    self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "release":
            self.grip[self.hand] = self.cfg.world.w_max
            if self._held(obs, self.hand) is None:
                self.settle += dt
                if self.settle > 0.4:
                    self._start_dwell()
                    self.phase = "final_dwell"
                    self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "final_dwell":
            return self._dwell(dt, "done", mark=False)
        return ScriptedStep(self._cmd(), self.score, done=True)

    # -- cylinder: open right bowl first, stop if found, otherwise left -------

    def _step_cylinder(self, obs: Observation, dt: float):
        w_max = self.cfg.world.w_max
        if self.phase == "reach_cover":
            self.score = 0.0
            hand = "right" if self.active_cover == "bowl_right" else "left"
            self.hand = hand
            est = self.est.get(self.active_cover)
            if est is None:
                self._gaze_at(obs, self.active_cover)
                return ScriptedStep(self._cmd(), 0.0)
            self._gaze_at(obs, self.active_cover)
            self.eff_target[hand] = est.position
            if est.open_flag:
                self.phase = "touch_hold"
                self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "touch_hold":
            # keep contact briefly so the flip-open pose is well represented
            self.eff_target[self.hand] = self.est[self.active_cover].position
            self._gaze_at(obs, self.active_cover)
            self.settle += dt
            if self.settle > 0.45:
                self.settle = 0.0
                self.phase = "check"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "check":
            self.eff_target[self.hand] = (
                self.est[self.active_cover].position + np.array([0.0, 0.0, 0.18]))
            self.settle += dt
            if obs.percept_for("cylinder") is not None:
                self.settle = 0.0
                self._start_dwell()
                self.phase = "found_dwell"
            elif self.settle > 0.5:
                self.settle = 0.0
                if self.active_cover == "bowl_right":
                    self.eff_target[self.hand] = HOME_RIGHT
                    self.active_cover = "bowl_left"
                    self.phase = "reach_cover"
                else:
                    self.phase = "found_dwell"   # should not happen
                    self._start_dwell()
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "found_dwell":
            self._gaze_at(obs, "cylinder")
            self.eff_target[self.hand] = (
                self.est[self.active_cover].position + np.array([0.0, 0.0, 0.18]))
            return self._dwell(dt, "pick")
        if self.phase == "pick":
            self.score = 0.0
            est = self.est.get("cylinder")
            if est is None:
                self._gaze_at(obs, "cylinder")
                return ScriptedStep(self._cmd(), 0.0)
            self.hand = "left" if est.position[1] > 0 else "right"
            self.eff_target[self.hand] = est.position
            self.grip[self.hand] = w_max
            self._gaze_at(obs, "cylinder")
            if self._near(obs, self.hand, est.position, 0.05):
                self.phase = "grasp"
                self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "grasp":
            # brief pre-close contact hold, then close and hold the grasp
            self.settle += dt
            self._gaze_at(obs, "cylinder")
            if self.settle > 0.35:
                self.grip[self.hand] = 0.0
            if self._held(obs, self.hand) == "cylinder" and self.settle > 0.8:
                self.phase = "carry"
                self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "carry":
            goal = self.est.get("goal")
            pos = goal.position if goal else np.array([0.50, 0.0, 0.80])
            above = pos + np.array([0.0, 0.0, 0.10])
            self.eff_target[self.hand] = above
            self._gaze_at(obs, "goal")
            if self._near(obs, self.hand, above, 0.05):
                self.settle += dt
                if self.settle > 0.4:
                    self.phase = "release"
                    self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "release":
            self.grip[self.hand] = self.cfg.world.w_max
            if self._held(obs, self.hand) is None:
                self.settle += dt
                if self.settle > 0.4:
                    self._start_dwell()
                    self.phase = "final_dwell"
                    self.settle = 0.0
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "final_dwell":
            return self._dwell(dt, "done", mark=False)
        return ScriptedStep(self._cmd(), self.score, done=True)

    # -- bottle: open cabinet, fixate tier, retrieve to the table -------------

    def _step_bottle(self, obs: Observation, dt: float):
        w_max = self.cfg.world.w_max
        if self.phase == "reach_cabinet":
            self.score = 0.0
            est = self.est.get("cabinet")
            self._gaze_at(obs, "cabinet")
            if est is None:
                return ScriptedStep(self._cmd(), 0.0)
            self.eff_target["right"] = est.position
            if est.open_flag:
                self.phase = "reveal"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "reveal":
            self.eff_target["right"] = HOME_RIGHT
            if obs.percept_for("bottle") is not None:
                self._start_dwell()
                self.phase = "found_dwell"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "found_dwell":
            self._gaze_at(obs, "bottle")
            return self._dwell(dt, "align")
        if self.phase == "align":
            self.score = 0.0
            est = self.est.get("bottle")
            if est is None:
                self._gaze_at(obs, "bottle")
                return ScriptedStep(self._cmd(), 0.0)
            self._gaze_at(obs, "bottle")
            self.eff_target["right"] = est.position
            self.grip["right"] = w_max
            if self._near(obs, "right", est.position, 0.05):
                self.phase = "grasp"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "grasp":
            self.grip["right"] = 0.0
            if self._held(obs, "right") == "bottle":
                self.phase = "carry"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "carry":
            self.eff_target["right"] = DROP_POINT + np.array([0.0, 0.0, 0.05])
            self.head_target = [TABLE_PITCH, 0.2]
            if self._near(obs, "right", DROP_POINT + np.array([0.0, 0.0, 0.05]), 0.04):
                self.phase = "release"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "release":
            self.grip["right"] = self.cfg.world.w_max
            if self._held(obs, "right") is None:
                self._start_dwell()
                self.phase = "final_dwell"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "final_dwell":
            return self._dwell(dt, "done", mark=False)
        return ScriptedStep(self._cmd(), self.score, done=True)

    # -- cans: bimanual pick, clockwise chassis scan, navigate, drop ----------

    def _step_cans(self, obs: Observation, dt: float):
        w_max = self.cfg.world.w_max
        if self.phase == "pick_first":
            self.score = 0.0
            self.head_target = [TABLE_PITCH, 0.0]
            left_can = self._can_on_side(obs, positive=True)
            if left_can is None:
                return ScriptedStep(self._cmd(), 0.0)
            est = self.est[left_can].position
            self.eff_target["left"] = est
            self.grip["left"] = 0.0 if self._near(obs, "left", est, 0.05) else w_max
            if self._held(obs, "left") is not None:
                self.phase = "pick_second"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "pick_second":
            right_can = self._can_on_side(obs, positive=False)
            if right_can is None:
                return ScriptedStep(self._cmd(), 0.0)
            est = self.est[right_can].position
            self.eff_target["right"] = est
            self.grip["right"] = 0.0 if self._near(obs, "right", est, 0.05) else w_max
            if self._held(obs, "right") is not None:
                self.eff_target["left"] = HOME_LEFT + np.array([0.0, 0.0, 0.1])
                self.eff_target["right"] = HOME_RIGHT + np.array([0.0, 0.0, 0.1])
                self._start_dwell()
                self.phase = "picked_dwell"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "picked_dwell":
            return self._dwell(dt, "scan_base")
        if self.phase == "scan_base":
            self.score = 0.0
            self.head_target = [0.50, 0.0]
            if obs.percept_for("dustbin") is not None:
                self.phase = "center_base"
            else:
                self.base_cmd = [0.0, -self.cfg.runtime.controller.w_max]
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "center_base":
            p = obs.percept_for("dustbin")
            if p is None:
                self.base_cmd = [0.0, -self.cfg.runtime.controller.w_max]
                return ScriptedStep(self._cmd(), 0.0)
            bearing = math.atan2(float(p.position[1]), float(p.position[0]))
            x, y, z = (float(v) for v in p.position)
            self.head_target = [obs.proprio["head"][0] - math.atan2(z, math.hypot(x, y)), 0.0]
            if abs(bearing) <= 0.5 * self.cfg.world.eps_center:
                self.base_cmd = [0.0, 0.0]
                self._start_dwell()
                self.phase = "centered_dwell"
            else:
                ctl = self.cfg.runtime.controller
                w = _clamp(ctl.k_w * bearing, -ctl.w_max, ctl.w_max)
                if abs(w) < ctl.w_min:
                    w = math.copysign(ctl.w_min, w)
                self.base_cmd = [0.0, w]
            return ScriptedStep(self._cmd(), 1.0 if abs(bearing) <= self.cfg.world.eps_center else 0.0)
        if self.phase == "centered_dwell":
            self._gaze_at(obs, "dustbin")
            self.head_target[1] = 0.0
            return self._dwell(dt, "navigate")
        if self.phase == "navigate":
            self.score = 0.0
            est = self.est.get("dustbin")
            chassis = obs.proprio["chassis"]
            goal = est.position
            dx, dy = goal[0] - chassis[0], goal[1] - chassis[1]
            dist = math.hypot(dx, dy)
            ctl = self.cfg.runtime.controller
            if dist <= 0.55:
                self.base_cmd = [0.0, 0.0]
                self.phase = "drop"
                return ScriptedStep(self._cmd(), 0.0)
            bearing = wrap_angle(math.atan2(dy, dx) - chassis[2])
            w = _clamp(ctl.k_w * bearing, -ctl.w_max, ctl.w_max)
            if abs(bearing) > 0.25:
                self.base_cmd = [0.0, math.copysign(max(abs(w), ctl.w_min), w)]
            else:
                v = _clamp(ctl.k_v * (dist - 0.5), ctl.v_min, ctl.v_max)
                self.base_cmd = [v, w if abs(bearing) > 0.05 else 0.0]
            self._gaze_at(obs, "dustbin")
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "drop":
            est = self.est["dustbin"].position
            over = est + np.array([0.0, 0.0, 0.30])
            self.eff_target["left"] = over + np.array([0.0, 0.04, 0.0])
            self.eff_target["right"] = over + np.array([0.0, -0.04, 0.0])
            self._gaze_at(obs, "dustbin")
            if (self._near(obs, "left", over + np.array([0.0, 0.04, 0.0]), 0.06)
                    and self._near(obs, "right", over + np.array([0.0, -0.04, 0.0]), 0.06)):
                self.grip["left"] = self.cfg.world.w_max
                self.grip["right"] = self.cfg.world.w_max
                if (self._held(obs, "left") is None
                        and self._held(obs, "right") is None):
                    self._start_dwell()
                    self.phase = "final_dwell"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "final_dwell":
            return self._dwell(dt, "done", mark=False)
        return ScriptedStep(self._cmd(), self.score, done=True)

    def _can_on_side(self, obs: Observation, positive: bool):
        best = None
        for eid, est in self.est.items():
            if est.kind == "target":
                if (est.position[1] > 0) == positive:
                    best = eid
        return best

    # -- ring/peg: bring the peg closer when far, then insert -----------------

    def _step_ringpeg(self, obs: Observation, dt: float):
        w_max = self.cfg.world.w_max
        if self.phase == "assess":
            self.score = 0.0
            p = obs.percept_for("peg")
            self._gaze_at(obs, "peg")
            if p is None:
                return ScriptedStep(self._cmd(), 0.0)
            if p.quality >= self.cfg.world.q_min:
                self._start_dwell()
                self.phase = "near_dwell"
            else:
                self.phase = "fetch_peg"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "fetch_peg":
            est = self.est.get("peg")
            self._gaze_at(obs, "peg")
            if est is None:
                return ScriptedStep(self._cmd(), 0.0)
            self.eff_target["right"] = est.position
            self.grip["right"] = 0.0 if self._near(obs, "right", est.position, 0.05) else w_max
            if self._held(obs, "right") == "peg":
                self.phase = "pull_peg"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "pull_peg":
            near = np.array([0.55, 0.12, 0.80])
            self.eff_target["right"] = near
            self._gaze_at(obs, "peg")
            if self._near(obs, "right", near, 0.04):
                self.grip["right"] = self.cfg.world.w_max
                if self._held(obs, "right") is None:
                    self.eff_target["right"] = HOME_RIGHT
                    self._start_dwell()
                    self.phase = "near_dwell"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "near_dwell":
            self._gaze_at(obs, "peg")
            return self._dwell(dt, "fetch_ring")
        if self.phase == "fetch_ring":
            self.score = 0.0
            est = self.est.get("ring")
            if est is None:
                self._gaze_at(obs, "ring")
                return ScriptedStep(self._cmd(), 0.0)
            self.eff_target["right"] = est.position
            self.grip["right"] = 0.0 if self._near(obs, "right", est.position, 0.05) else w_max
            self._gaze_at(obs, "ring")
            if self._held(obs, "right") == "ring":
                self.phase = "mount"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "mount":
            peg = self.est["peg"].position
            self.eff_target["right"] = peg + np.array([0.0, 0.0, 0.02])
            self._gaze_at(obs, "peg")
            if self._near(obs, "right", peg + np.array([0.0, 0.0, 0.02]), 0.035):
                self.grip["right"] = self.cfg.world.w_max
                if self._held(obs, "right") is None:
                    self._start_dwell()
                    self.phase = "final_dwell"
            return ScriptedStep(self._cmd(), 0.0)
        if self.phase == "final_dwell":
            self.eff_target["right"] = HOME_RIGHT
            return self._dwell(dt, "done", mark=False)
        return ScriptedStep(self._cmd(), self.score, done=True)


def aggregate_head_from_proprio(proprio: dict, calib: MountCalibration) -> Pose:
    from ..geometry import ChassisState, HeadState
    cx, cy, cyaw = proprio["chassis"]
    pitch, yaw = proprio["head"]
    return aggregate_head(ChassisState(cx, cy, cyaw), HeadState(pitch, yaw), calib)


# ---------------------------------------------------------------------------
# Macro-level protocols for the oracle world.
# ---------------------------------------------------------------------------

def scripted_policy(kind: str):
    """(history, Observation) -> MacroAction protocol over macro steps.

    History is the list of prior observations; the protocols derive all
    branching from percepts and the proprioception echo only.
    """
    if kind == "cylinder":
        return _cylinder_macro
    if kind == "croissant":
        return _croissant_macro
    if kind == "cans":
        return _cans_macro
    if kind == "bottle":
        return _bottle_macro
    if kind == "ringpeg":
        return _ringpeg_macro
    raise ValueError(f"unknown scenario kind {kind!r}")


def _cylinder_macro(history, obs: Observation) -> MacroAction:
    held = obs.proprio["held"]
    target = obs.percept_for("cylinder")
    if "cylinder" in held.values():
        return MacroAction.place("left" if held["left"] == "cylinder" else "right",
                                 (0.50, 0.0, 0.80))
    if target is not None:
        hand = "left" if target.position[1] > 0 else "right"
        return MacroAction.grasp(hand, "cylinder")
    right = obs.percept_for("bowl_right")
    if right is not None and right.open_flag is False:
        return MacroAction.uncover("bowl_right")
    left = obs.percept_for("bowl_left")
    if left is not None and left.open_flag is False:
        return MacroAction.uncover("bowl_left")
    return MacroAction.no_op()


def _croissant_macro(history, obs: Observation) -> MacroAction:
    target = obs.percept_for("croissant")
    held = obs.proprio["held"]
    if "croissant" in held.values():
        return MacroAction.place(
            "left" if held["left"] == "croissant" else "right", (0.70, 0.0, 0.80))
    if target is not None:
        bearing = math.atan2(float(target.position[1]), float(target.position[0]))
        if abs(bearing) > 0.12:
            return MacroAction.pan(bearing)
        hand = "left" if target.position[1] > 0 else "right"
        return MacroAction.grasp(hand, "croissant")
    yaw = obs.proprio["head"][1]
    if history:
        prev_yaw = history[-1].proprio["head"][1]
        direction = 1.0 if yaw >= prev_yaw else -1.0
    else:
        direction = 1.0
    if yaw >= SCAN_AMPLITUDE - 1e-6:
        direction = -1.0
    elif yaw <= -SCAN_AMPLITUDE + 1e-6:
        direction = 1.0
    return MacroAction.pan(direction * 0.35)


def _cans_macro(history, obs: Observation) -> MacroAction:
    held = obs.proprio["held"]
    cans = obs.percepts_of_kind("target")
    if held["left"] is None and cans:
        pick = max(cans, key=lambda p: float(p.position[1]))
        return MacroAction.grasp("left", pick.entity_id)
    if held["right"] is None and cans:
        pick = min(cans, key=lambda p: float(p.position[1]))
        return MacroAction.grasp("right", pick.entity_id)
    bin_p = obs.percept_for("dustbin")
    if bin_p is None:
        return MacroAction.rotate_base(-0.4)
    head = aggregate_head_from_proprio(obs.proprio, MountCalibration())
    world = head.transform_point(bin_p.position)
    chassis = obs.proprio["chassis"]
    if math.hypot(world[0] - chassis[0], world[1] - chassis[1]) > 0.9:
        return MacroAction.advance(0.3)
    if held["left"] is not None:
        return MacroAction.place("left", tuple(world))
    if held["right"] is not None:
        return MacroAction.place("right", tuple(world))
    return MacroAction.no_op()


def _bottle_macro(history, obs: Observation) -> MacroAction:
    cab = obs.percept_for("cabinet")
    if cab is not None and cab.open_flag is False:
        return MacroAction.open("cabinet")
    held = obs.proprio["held"]
    if "bottle" in held.values():
        return MacroAction.place(
            "left" if held["left"] == "bottle" else "right", tuple(DROP_POINT))
    if obs.percept_for("bottle") is not None:
        return MacroAction.grasp("right", "bottle")
    return MacroAction.no_op()


def _ringpeg_macro(history, obs: Observation) -> MacroAction:
    peg = obs.percept_for("peg")
    held = obs.proprio["held"]
    if "ring" in held.values():
        return MacroAction.insert("ring", "peg")
    if peg is not None and peg.quality < 0.8:
        return MacroAction.bring_closer("peg")
    if obs.percept_for("ring") is not None:
        return MacroAction.grasp("right", "ring")
    return MacroAction.no_op()


# ---------------------------------------------------------------------------
# Chunk-emitter wrapper: the scripted controller as a deployment policy.
# ---------------------------------------------------------------------------

class ScriptedChunkPolicy:
    """Wraps the continuous controller as a receding-horizon chunk source."""

    def __init__(self, kind: str, cfg: LabConfig, seed: int = 0,
                 search_only: bool = False):
        self.kind = kind
        self.cfg = cfg
        self.controller = ScriptedController(kind, cfg, seed,
                                             search_only=search_only)
        self.base_inv = None
        self.calib = MountCalibration(z_fixed=cfg.geometry.z_fixed)

    def begin_episode(self, scenario, base: Pose, rng):
        self.controller.reset()
        self.base_inv = base.inverse()
        self._marks = 0

    def plan(self, plan_input) -> tuple[np.ndarray, float]:
        obs = plan_input["observation"]
        dt = plan_input["dt"]
        step = self.controller.step(obs, dt * self.cfg.runtime.n_exec)
        score = step.score
        # The executor transitions ~1 s into the 3 s dwell; keep quiet until
        # the internal protocol catches up with the executor's sub-task.
        if self._marks != plan_input.get("subtask_index", self._marks):
            score = 0.0
        if step.mark:
            self._marks += 1
        cmd = step.cmd
        k = self.cfg.runtime.chunk_size
        rows = np.empty((k, ACTION_DIM))
        chassis = list(obs.proprio["chassis"])
        pitch, yaw = obs.proprio["head"]
        eff = {"left": np.asarray(obs.proprio["eff_left"], dtype=float).copy(),
               "right": np.asarray(obs.proprio["eff_right"], dtype=float).copy()}
        grip = {"left": obs.proprio["grip_left_w"], "right": obs.proprio["grip_right_w"]}
        for hand in ("left", "right"):
            if cmd.__getattribute__(f"grip_{hand}_w") is not None:
                grip[hand] = getattr(cmd, f"grip_{hand}_w")
        w_max = self.cfg.world.w_max
        for j in range(k):
            chassis[0] += cmd.base_v * math.cos(chassis[2]) * dt
            chassis[1] += cmd.base_v * math.sin(chassis[2]) * dt
            chassis[2] = wrap_angle(chassis[2] + cmd.base_w * dt)
            if cmd.head_pitch is not None:
                dp = _clamp(cmd.head_pitch - pitch, -self.cfg.world.head_rate * dt,
                            self.cfg.world.head_rate * dt)
                pitch += dp
            if cmd.head_yaw is not None:
                dy = _clamp(cmd.head_yaw - yaw, -self.cfg.world.head_rate * dt,
                            self.cfg.world.head_rate * dt)
                yaw += dy
            for hand, tgt in (("left", cmd.eff_left), ("right", cmd.eff_right)):
                if tgt is not None:
                    delta = np.asarray(tgt, dtype=float) - eff[hand]
                    dist = float(np.linalg.norm(delta))
                    stepd = self.cfg.world.effector_speed * dt
                    eff[hand] = (np.asarray(tgt, dtype=float).copy()
                                 if dist <= stepd else eff[hand] + delta * (stepd / dist))
            head_world = Pose(
                Rotation(rot_z(chassis[2] + yaw) @ rot_y(pitch)),
                np.array([chassis[0], chassis[1], self.calib.z_fixed]))
            head_b = self.base_inv.compose(head_world)
            left_b = self.base_inv.compose(Pose(Rotation.identity(), eff["left"]))
            right_b = self.base_inv.compose(Pose(Rotation.identity(), eff["right"]))
            rows[j] = action_from_poses(head_b, left_b, right_b,
                                        grip["left"] / w_max, grip["right"] / w_max)
        return rows, score
