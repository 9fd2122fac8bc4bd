# coding:utf-8

from dataclasses import replace
import heapq
import os
from tempfile import TemporaryDirectory
import unittest

import numpy as np

from gridflare.errors import ConfigError
from gridflare.errors import ContractError
from gridflare.errors import UnsatisfiableInstructionError
from gridflare.house.actions import CAMERA_TILT_UP
from gridflare.house.actions import Action
from gridflare.house.actions import mask_for_embodiment
from gridflare.house.catalog import category
from gridflare.house.env import AgentState
from gridflare.house.env import EnvConfig
from gridflare.house.env import EpisodeContext
from gridflare.house.env import goal_satisfied
from gridflare.house.env import observe
from gridflare.house.env import offset
from gridflare.house.env import reset
from gridflare.house.env import reset_state
from gridflare.house.env import success_check
from gridflare.house.env import transition
from gridflare.house.layout import House
from gridflare.house.layout import ObjectInstance
from gridflare.house.layout import flood_fill
from gridflare.house.layout import generate_house
from gridflare.house.planner import expert_rollout
from gridflare.house.planner import plan
from gridflare.house.records import EpisodeRecord
from gridflare.house.records import read_records
from gridflare.house.records import write_records
from gridflare.house.tasks import Instruction
from gridflare.house.tasks import TaskKind
from gridflare.house.tasks import parse_task
from gridflare.house.tasks import sample_instruction
from gridflare.house.tasks import valid_targets
from gridflare.house.tokens import CELL_WALL
from gridflare.house.tokens import OBSERVATION_TOKENS
from gridflare.house.tokens import tilt_token
from gridflare.house.vector import EVAL_SEEDS
from gridflare.house.vector import TRAIN_SEEDS
from gridflare.house.vector import VectorEnv
from gridflare.house.vector import assert_disjoint
from gridflare.house.vector import episode_specs

NORTH, EAST, SOUTH, WEST = range(4)


def item(index: int, name: str, size: int, position) -> ObjectInstance:
    return ObjectInstance(id=index, category=name, size_class=size,
                          tags=tuple(sorted(category(name).tags)), position=position)  # noqa:E501


def small_house(*objects: ObjectInstance, split: bool = False) -> House:
    """9x9 house; with ``split`` a wall at column 4 (door at row 4) makes two rooms."""  # noqa:E501
    walls = np.ones((9, 9), dtype=bool)
    walls[1:8, 1:8] = False
    rooms = np.zeros((9, 9), dtype=np.int64)
    types = ("kitchen",)
    if split:
        walls[1:8, 4] = True
        walls[4, 4] = False
        rooms[:, 5:] = 1
        types = ("kitchen", "bedroom")
    rooms[walls] = -1
    return House(seed=0, walls=walls, rooms=rooms, room_types=types, objects=tuple(objects))  # noqa:E501


def agent(house: House, position, heading: int) -> AgentState:
    return AgentState(position=position, heading=heading,
                      object_positions=tuple(obj.position for obj in house.objects))  # noqa:E501


def run(context: EpisodeContext, state: AgentState, *actions):
    total = []
    done, info = False, {}
    for action in actions:
        state, reward, done, info = transition(context, state, action)
        total.append(reward)
    return state, total, done, info


class TestHouseGeneration(unittest.TestCase):

    def test_same_seed_same_house(self):
        first = generate_house(7, 3)
        second = generate_house(7, 3)
        self.assertEqual(first, second)
        self.assertEqual(first.walls.tobytes(), second.walls.tobytes())
        self.assertEqual(first.rooms.tobytes(), second.rooms.tobytes())
        self.assertNotEqual(first, generate_house(8, 3))

    def test_seed_sweep_invariants(self):
        for seed in range(200):
            room_count = 2 + seed % 5
            house = generate_house(seed, room_count)
            floor = set(house.floor_cells())
            self.assertEqual(flood_fill(next(iter(sorted(floor))), house.is_floor), floor)  # noqa:E501
            self.assertEqual(set(np.unique(house.rooms[~house.walls])), set(range(room_count)))  # noqa:E501
            for room in range(room_count):
                cells = {cell for cell in floor if house.room_of(cell) == room}  # noqa:E501
                self.assertEqual(flood_fill(min(cells), lambda cell, r=room: house.is_floor(cell) and house.room_of(cell) == r), cells)  # noqa:E501
            if room_count <= 5:
                self.assertEqual(len(set(house.room_types)), room_count)
            self.assertTrue(any(obj.pickupable for obj in house.objects))
            for obj in house.objects:
                self.assertTrue(house.is_floor(obj.position))
                self.assertIn(obj.size_class, category(obj.category).sizes)

    def test_room_count_two(self):
        house = generate_house(11, 2)
        self.assertEqual(house.room_count, 2)
        self.assertEqual(sorted(np.unique(house.rooms[~house.walls])), [0, 1])

    def test_room_count_out_of_range(self):
        self.assertRaises(ContractError, generate_house, 1, 1)
        self.assertRaises(ContractError, generate_house, 1, 7)


class TestInstruction(unittest.TestCase):

    INSTRUCTIONS = [
        Instruction(TaskKind.OBJECT_NAV, ("mug",)),
        Instruction(TaskKind.PICKUP, ("mug",)),
        Instruction(TaskKind.FETCH, ("apple",)),
        Instruction(TaskKind.ROOM_VISIT, ("5",)),
        Instruction(TaskKind.OBJ_NAV_REL_ATTR, ("apple", "largest")),
        Instruction(TaskKind.OBJ_NAV_REL_ATTR, ("apple", "smallest")),
        Instruction(TaskKind.ROOM_NAV, ("kitchen",)),
        Instruction(TaskKind.OBJ_NAV_AFFORD, ("sittable",)),
    ]

    def test_tokens_round_trip(self):
        for instruction in self.INSTRUCTIONS:
            tokens = instruction.tokens()
            self.assertEqual(tokens.shape, (8,))
            self.assertEqual(Instruction.from_tokens(tokens), instruction)

    def test_tokens_injective(self):
        encoded = {tuple(instruction.tokens()) for instruction in self.INSTRUCTIONS}  # noqa:E501
        self.assertEqual(len(encoded), len(self.INSTRUCTIONS))

    def test_descriptor_must_fit_kind(self):
        self.assertRaises(ContractError, Instruction, TaskKind.ROOM_NAV, ("mug",))  # noqa:E501
        self.assertRaises(ContractError, Instruction, TaskKind.OBJ_NAV_REL_ATTR, ("apple",))  # noqa:E501

    def test_parse_task(self):
        self.assertIs(parse_task("ObjectNav"), TaskKind.OBJECT_NAV)
        with self.assertRaises(ConfigError) as context:
            parse_task("swim")
        self.assertIn("objnavafford", str(context.exception))

    def test_forced_choice(self):
        house = small_house(item(0, "mug", 1, (2, 2)))
        for seed in range(5):
            self.assertEqual(sample_instruction(TaskKind.OBJECT_NAV, house, seed).target, ("mug",))  # noqa:E501
        self.assertEqual(sample_instruction("roomnav", house, 3).target, ("kitchen",))  # noqa:E501

    def test_unsatisfiable(self):
        house = small_house(item(0, "mug", 1, (2, 2)))
        self.assertRaises(UnsatisfiableInstructionError, sample_instruction, TaskKind.OBJ_NAV_AFFORD, small_house(), 0)  # noqa:E501
        self.assertRaises(UnsatisfiableInstructionError, sample_instruction, TaskKind.OBJ_NAV_REL_ATTR, house, 0)  # noqa:E501
        self.assertIsInstance(UnsatisfiableInstructionError("x"), LookupError)  # noqa:E501

    def test_relative_attribute_needs_unique_extremum(self):
        house = small_house(item(0, "apple", 1, (2, 2)), item(1, "apple", 2, (2, 6)), item(2, "apple", 2, (6, 6)))  # noqa:E501
        self.assertEqual(valid_targets(TaskKind.OBJ_NAV_REL_ATTR, house), [("apple", "smallest")])  # noqa:E501

    def test_room_nav_targets_present_types(self):
        for seed in range(20):
            house = generate_house(seed, 2)
            instruction = sample_instruction(TaskKind.ROOM_NAV, house, seed)
            self.assertIn(instruction.target[0], house.room_types)


class TestStep(unittest.TestCase):

    def setUp(self):
        self.mug = item(0, "mug", 1, (3, 3))
        self.house = small_house(self.mug, item(1, "sofa", 3, (6, 2)))
        self.find_mug = EpisodeContext(self.house, Instruction(TaskKind.OBJECT_NAV, ("mug",)))  # noqa:E501

    def test_done_facing_target(self):
        state, rewards, done, info = run(self.find_mug, agent(self.house, (4, 3), NORTH), Action.DONE)  # noqa:E501
        self.assertEqual(rewards, [1.0])
        self.assertTrue(done)
        self.assertTrue(info["success"])
        self.assertTrue(state.success)

    def test_unsuccessful_done_terminates(self):
        state, rewards, done, info = run(self.find_mug, agent(self.house, (6, 6), SOUTH), Action.DONE)  # noqa:E501
        self.assertEqual(rewards, [0.0])
        self.assertTrue(done)
        self.assertFalse(info["success"])
        self.assertFalse(info["truncated"])

    def test_move_into_wall(self):
        start = agent(self.house, (1, 3), NORTH)
        state, rewards, done, info = run(self.find_mug, start, Action.MOVE_AHEAD)  # noqa:E501
        self.assertEqual(state.position, (1, 3))
        self.assertEqual(state.collisions, 1)
        self.assertEqual(rewards, [0.0])
        self.assertTrue(info["collision"])
        self.assertFalse(done)

    def test_move_into_object(self):
        state, _, _, _ = run(self.find_mug, agent(self.house, (4, 3), NORTH), Action.MOVE_AHEAD)  # noqa:E501
        self.assertEqual((state.position, state.collisions), ((4, 3), 1))

    def test_free_move_has_no_collision(self):
        state, _, _, info = run(self.find_mug, agent(self.house, (5, 5), NORTH), Action.MOVE_AHEAD, Action.MOVE_BACK)  # noqa:E501
        self.assertEqual((state.position, state.collisions), ((5, 5), 0))
        self.assertFalse(info["collision"])

    def test_step_penalty(self):
        context = replace(self.find_mug, config=EnvConfig(step_penalty=True))
        _, rewards, done, _ = run(context, agent(self.house, (5, 5), NORTH), Action.ROTATE_LEFT)  # noqa:E501
        self.assertFalse(done)
        self.assertAlmostEqual(rewards[0], -0.01)

    def test_step_penalty_spares_terminal_step(self):
        context = replace(self.find_mug, config=EnvConfig(step_penalty=True))
        _, rewards, done, _ = run(context, agent(self.house, (4, 3), NORTH), Action.DONE)  # noqa:E501
        self.assertTrue(done)
        self.assertEqual(rewards, [1.0])
        state = replace(agent(self.house, (5, 5), NORTH), steps=199)
        _, reward, done, info = transition(context, state, Action.ROTATE_LEFT)
        self.assertTrue(info["truncated"])
        self.assertEqual(reward, 0.0)

    def test_collision_penalty(self):
        context = replace(self.find_mug, config=EnvConfig(collision_penalty=True))  # noqa:E501
        _, rewards, _, _ = run(context, agent(self.house, (1, 3), NORTH), Action.MOVE_AHEAD, Action.ROTATE_LEFT)  # noqa:E501
        self.assertEqual(rewards, [-0.5, 0.0])

    def test_action_out_of_range(self):
        start = agent(self.house, (5, 5), NORTH)
        self.assertRaises(ContractError, transition, self.find_mug, start, 20)
        self.assertRaises(ContractError, transition, self.find_mug, start, -1)

    def test_truncation(self):
        state = replace(agent(self.house, (5, 5), NORTH), steps=199)
        state, _, done, info = transition(self.find_mug, state, Action.ROTATE_LEFT)  # noqa:E501
        self.assertTrue(done)
        self.assertTrue(info["truncated"])
        self.assertFalse(info["success"])
        self.assertRaises(ContractError, transition, self.find_mug, state, Action.ROTATE_LEFT)  # noqa:E501

    def test_pickup_within_reach(self):
        house = small_house(item(0, "mug", 1, (2, 3)))
        context = EpisodeContext(house, Instruction(TaskKind.PICKUP, ("mug",)))
        start = agent(house, (4, 3), NORTH)
        state, _, _, _ = run(context, start, Action.PICKUP)
        self.assertIsNone(state.held_object)
        state, rewards, done, _ = run(context, start, Action.ARM_EXTEND, Action.PICKUP, Action.DONE)  # noqa:E501
        self.assertEqual(state.held_object, 0)
        self.assertIsNone(state.object_positions[0])
        self.assertEqual(rewards, [0.0, 0.0, 1.0])
        self.assertTrue(done)

    def test_dropoff(self):
        house = small_house(item(0, "mug", 1, (3, 3)))
        context = EpisodeContext(house, Instruction(TaskKind.FETCH, ("mug",)))
        state, _, _, _ = run(context, agent(house, (4, 3), NORTH), Action.PICKUP, Action.ROTATE_RIGHT, Action.DROPOFF)  # noqa:E501
        self.assertIsNone(state.held_object)
        self.assertEqual(state.object_positions[0], (4, 4))

    def test_pickup_rejects_large_object(self):
        state, _, _, _ = run(self.find_mug, agent(self.house, (5, 2), SOUTH), Action.PICKUP)  # noqa:E501
        self.assertIsNone(state.held_object)


class TestSuccess(unittest.TestCase):

    def test_fetch_holding_target(self):
        house = small_house(item(0, "mug", 1, (3, 3)))
        state = replace(agent(house, (5, 5), NORTH), held_object=0, object_positions=(None,))  # noqa:E501
        self.assertTrue(success_check(house, state, Instruction(TaskKind.FETCH, ("mug",))))  # noqa:E501
        self.assertFalse(success_check(house, state, Instruction(TaskKind.FETCH, ("apple",))))  # noqa:E501

    def test_relative_attribute_needs_extremal_instance(self):
        house = small_house(item(0, "apple", 1, (2, 2)), item(1, "apple", 2, (6, 6)))  # noqa:E501
        largest = Instruction(TaskKind.OBJ_NAV_REL_ATTR, ("apple", "largest"))
        self.assertFalse(success_check(house, agent(house, (3, 2), NORTH), largest))  # noqa:E501
        self.assertTrue(success_check(house, agent(house, (5, 6), SOUTH), largest))  # noqa:E501
        smallest = Instruction(TaskKind.OBJ_NAV_REL_ATTR, ("apple", "smallest"))  # noqa:E501
        self.assertTrue(success_check(house, agent(house, (3, 2), NORTH), smallest))  # noqa:E501

    def test_target_must_be_close(self):
        house = small_house(item(0, "mug", 1, (1, 3)))
        find_mug = Instruction(TaskKind.OBJECT_NAV, ("mug",))
        self.assertFalse(success_check(house, agent(house, (5, 3), NORTH), find_mug))  # noqa:E501
        self.assertTrue(success_check(house, agent(house, (3, 3), NORTH), find_mug))  # noqa:E501
        self.assertFalse(success_check(house, agent(house, (3, 3), SOUTH), find_mug))  # noqa:E501

    def test_affordance_and_room(self):
        house = small_house(item(0, "chair", 2, (3, 3)), split=True)
        sit = Instruction(TaskKind.OBJ_NAV_AFFORD, ("sittable",))
        self.assertTrue(success_check(house, agent(house, (4, 3), NORTH), sit))
        bedroom = Instruction(TaskKind.ROOM_NAV, ("bedroom",))
        self.assertFalse(success_check(house, agent(house, (4, 3), NORTH), bedroom))  # noqa:E501
        self.assertTrue(success_check(house, agent(house, (4, 6), NORTH), bedroom))  # noqa:E501

    def test_room_visit(self):
        house = small_house(split=True)
        context = EpisodeContext(house, Instruction(TaskKind.ROOM_VISIT, ("2",)))  # noqa:E501
        start = agent(house, (4, 2), EAST)
        walk = (Action.MOVE_AHEAD, Action.MOVE_AHEAD, Action.MOVE_AHEAD)
        _, rewards, done, _ = run(context, start, Action.SUB_DONE, *walk, Action.SUB_DONE, Action.DONE)  # noqa:E501
        self.assertEqual(rewards, [0.0] * 5 + [1.0])
        self.assertTrue(done)
        state, rewards, _, _ = run(context, start, Action.SUB_DONE, *walk, Action.DONE)  # noqa:E501
        self.assertFalse(state.success)
        state, rewards, _, _ = run(context, start, Action.SUB_DONE, Action.SUB_DONE, *walk, Action.SUB_DONE, Action.DONE)  # noqa:E501
        self.assertTrue(state.fault)
        self.assertFalse(state.success)

    def test_sub_done_only_upon_entry(self):
        house = small_house(split=True)
        context = EpisodeContext(house, Instruction(TaskKind.ROOM_VISIT, ("2",)))  # noqa:E501
        start = agent(house, (4, 2), EAST)
        walk = (Action.MOVE_AHEAD, Action.MOVE_AHEAD, Action.MOVE_AHEAD)
        state, _, _, _ = run(context, start, Action.ROTATE_LEFT, Action.ROTATE_RIGHT, Action.SUB_DONE)  # noqa:E501
        self.assertTrue(state.fault)
        state, rewards, _, _ = run(context, start, Action.SUB_DONE, *walk, Action.MOVE_AHEAD, Action.SUB_DONE, Action.DONE)  # noqa:E501
        self.assertTrue(state.fault)
        self.assertEqual(rewards[-1], 0.0)
        state, _, _, _ = run(context, start, Action.SUB_DONE, *walk)
        self.assertTrue(state.entered_room)
        self.assertFalse(state.fault)

    def test_final_sub_done_keeps_episode_open(self):
        house = small_house(split=True)
        context = EpisodeContext(house, Instruction(TaskKind.ROOM_VISIT, ("2",)))  # noqa:E501
        walk = (Action.MOVE_AHEAD, Action.MOVE_AHEAD, Action.MOVE_AHEAD)
        _, rewards, done, _ = run(context, agent(house, (4, 2), EAST), Action.SUB_DONE, *walk, Action.SUB_DONE)  # noqa:E501
        self.assertFalse(done)
        self.assertEqual(sum(rewards), 0.0)


class TestObservation(unittest.TestCase):

    def test_outside_is_wall(self):
        house = small_house(item(0, "mug", 1, (5, 5)))
        context = EpisodeContext(house, Instruction(TaskKind.OBJECT_NAV, ("mug",)))  # noqa:E501
        obs = observe(context, agent(house, (1, 3), NORTH))
        self.assertTrue(np.all(obs.window[:6] == CELL_WALL))
        self.assertEqual(obs.tokens().shape, (OBSERVATION_TOKENS,))
        self.assertEqual(Instruction.from_tokens(obs.instruction), context.instruction)  # noqa:E501

    def test_noise_is_seeded(self):
        house = generate_house(5, 3)
        instruction = sample_instruction(TaskKind.OBJECT_NAV, house, 5)
        config = EnvConfig(obs_noise=0.5)
        first, second = (observe(EpisodeContext(house, instruction, config), reset_state(EpisodeContext(house, instruction, config), 1), np.random.default_rng(3)) for _ in range(2))  # noqa:E501
        clean = observe(EpisodeContext(house, instruction), reset_state(EpisodeContext(house, instruction), 1))  # noqa:E501
        np.testing.assert_array_equal(first.window, second.window)
        self.assertFalse(np.array_equal(first.window, clean.window))


class TestReset(unittest.TestCase):

    def test_deterministic(self):
        house = generate_house(3, 3)
        instruction = sample_instruction(TaskKind.OBJECT_NAV, house, 0)
        first_state, first_obs = reset(house, instruction, 42)
        second_state, second_obs = reset(house, instruction, 42)
        self.assertEqual(first_state, second_state)
        np.testing.assert_array_equal(first_obs.tokens(), second_obs.tokens())
        self.assertEqual(first_state.steps, 0)
        self.assertEqual(first_state.collisions, 0)

    def test_initial_predicate_false(self):
        for seed in range(60):
            house = generate_house(seed, 2 + seed % 3)
            for kind in (TaskKind.OBJECT_NAV, TaskKind.ROOM_NAV, TaskKind.OBJ_NAV_AFFORD):  # noqa:E501
                instruction = sample_instruction(kind, house, seed)
                state, _ = reset(house, instruction, seed)
                self.assertFalse(success_check(house, state, instruction))

    def test_pickup_target_in_view(self):
        for spec in episode_specs(TaskKind.PICKUP, 10, TRAIN_SEEDS):
            house, instruction = spec.build()
            context = EpisodeContext(house, instruction)
            state = reset_state(context, spec.reset_seed)
            obs = observe(context, state)
            wanted = {obj.position for obj in house.objects if obj.category == instruction.target[0]}  # noqa:E501
            self.assertTrue(wanted.intersection(offset(state.position, state.heading, 6 - r, c - 3) for r in range(7) for c in range(7)))  # noqa:E501
            self.assertEqual(obs.window.shape, (7, 7))


def dijkstra_length(context: EpisodeContext, start: AgentState) -> int:
    occupied = set(start.object_positions)
    moves = ((-1, 0), (0, 1), (1, 0), (0, -1))
    queue = [(0, start.position, start.heading)]
    best = {(start.position, start.heading): 0}
    while queue:
        cost, cell, heading = heapq.heappop(queue)
        if cost > best[(cell, heading)]:
            continue
        if goal_satisfied(context, replace(start, position=cell, heading=heading)):  # noqa:E501
            return cost
        dr, dc = moves[heading]
        successors = [(cell, (heading + 1) % 4), (cell, (heading + 3) % 4)]
        for sign in (1, -1):
            nxt = (cell[0] + sign * dr, cell[1] + sign * dc)
            if context.house.is_floor(nxt) and nxt not in occupied:
                successors.append((nxt, heading))
        for pose in successors:
            if cost + 1 < best.get(pose, 1 << 30):
                best[pose] = cost + 1
                heapq.heappush(queue, (cost + 1, *pose))
    raise AssertionError("goal unreachable")


class TestPlanner(unittest.TestCase):

    def test_replays_succeed(self):
        for kind in TaskKind:
            for spec in episode_specs(kind, 4, EVAL_SEEDS):
                house, instruction = spec.build()
                actions = expert_rollout(house, instruction, spec.reset_seed)
                self.assertEqual(len(actions), spec.expert_length)
                context = EpisodeContext(house, instruction)
                state, rewards, done, _ = run(context, reset_state(context, spec.reset_seed), *actions)  # noqa:E501
                self.assertTrue(state.success, msg=f"{kind.value} {spec.house_seed}")  # noqa:E501
                self.assertEqual(rewards[-1], 1.0)
                self.assertTrue(done)

    def test_matches_dijkstra(self):
        for spec in episode_specs(TaskKind.OBJECT_NAV, 20, EVAL_SEEDS):
            house, instruction = spec.build()
            context = EpisodeContext(house, instruction)
            start = reset_state(context, spec.reset_seed)
            self.assertEqual(len(plan(context, start)) - 1, dijkstra_length(context, start))  # noqa:E501

    def test_target_behind(self):
        house = small_house(item(0, "mug", 1, (5, 3)))
        context = EpisodeContext(house, Instruction(TaskKind.OBJECT_NAV, ("mug",)))  # noqa:E501
        actions = plan(context, agent(house, (4, 3), NORTH))
        self.assertLessEqual(len(actions), 4)
        self.assertEqual(actions[-1], Action.DONE)

    def test_embodiment_b_plans_without_reversing(self):
        config = EnvConfig(embodiment="b")
        for spec in episode_specs(TaskKind.OBJECT_NAV, 5, EVAL_SEEDS, config):
            house, instruction = spec.build()
            actions = expert_rollout(house, instruction, spec.reset_seed, config)  # noqa:E501
            self.assertNotIn(int(Action.MOVE_BACK), actions)


class TestEmbodiment(unittest.TestCase):

    def test_masks(self):
        self.assertEqual(len(mask_for_embodiment("a").valid_indices), 20)
        mask = mask_for_embodiment("B")
        self.assertEqual(len(mask.valid_indices), 9)
        self.assertFalse(mask.allows(Action.PICKUP))
        self.assertFalse(mask.allows(Action.MOVE_BACK))
        self.assertEqual(sorted(mask.repurposed), [16, 17])
        self.assertRaises(ConfigError, mask_for_embodiment, "c")

    def test_camera_tilt(self):
        house = small_house(item(0, "mug", 1, (2, 3)))
        context = EpisodeContext(house, Instruction(TaskKind.OBJECT_NAV, ("mug",)), EnvConfig(embodiment="b"))  # noqa:E501
        start = agent(house, (5, 3), NORTH)
        state, _, _, _ = run(context, start, CAMERA_TILT_UP, Action.ARM_EXTEND, Action.MOVE_BACK)  # noqa:E501
        self.assertEqual(state.camera_tilt, 1)
        self.assertEqual(state.arm_extension, 0)
        self.assertEqual(state.position, (5, 3))
        tilted = observe(context, state)
        level = observe(context, start)
        self.assertEqual(tilted.proprio[2], tilt_token(1))
        np.testing.assert_array_equal(tilted.window[1:], level.window[:-1])
        under_a = replace(context, config=EnvConfig())
        state, _, _, _ = run(under_a, start, CAMERA_TILT_UP)
        self.assertEqual(state.camera_tilt, 0)


class TestVectorEnv(unittest.TestCase):

    def test_seed_ranges(self):
        assert_disjoint(TRAIN_SEEDS, EVAL_SEEDS)
        self.assertRaises(ContractError, assert_disjoint, (0, 10), (5, 20))
        for spec in episode_specs(TaskKind.FETCH, 5):
            self.assertGreaterEqual(spec.house_seed, EVAL_SEEDS[0])

    def test_sparse_reward_purity(self):
        envs = VectorEnv([TaskKind.OBJECT_NAV, TaskKind.FETCH], workers=4, seed=0)  # noqa:E501
        envs.reset_all()
        rng = np.random.default_rng(0)
        episode_rewards = [[] for _ in range(4)]
        for _ in range(60):
            _, rewards, dones, _ = envs.step_all(rng.integers(0, 20, size=4))
            for index in range(4):
                episode_rewards[index].append(rewards[index])
                if dones[index]:
                    self.assertLessEqual(sum(r == 1.0 for r in episode_rewards[index]), 1)  # noqa:E501
                    self.assertTrue(all(r == 0.0 for r in episode_rewards[index][:-1]))  # noqa:E501
                    episode_rewards[index] = []
            self.assertTrue(set(rewards.tolist()) <= {0.0, 1.0})
            envs.reset_done()

    def test_step_before_reset(self):
        envs = VectorEnv(["objectnav"], workers=2, seed=0)
        self.assertRaises(ContractError, envs.step_all, [0, 0])

    def test_worker_streams_are_independent(self):
        def trajectory(workers: int):
            envs = VectorEnv(["objectnav"], workers=workers, seed=9)
            tokens = [envs.reset_all()[0].tokens()]
            for _ in range(15):
                observations, _, _, _ = envs.step_all([Action.MOVE_AHEAD] * workers)  # noqa:E501
                tokens.append(observations[0].tokens())
                envs.reset_done()
                tokens.append(envs.observations[0].tokens())
            return np.stack(tokens)
        np.testing.assert_array_equal(trajectory(1), trajectory(3))

    def test_episode_steps(self):
        envs = VectorEnv(["roomvisit"], workers=2, seed=1)
        envs.reset_all()
        envs.step_all([Action.ROTATE_LEFT] * 2)
        envs.step_all([Action.ROTATE_LEFT] * 2)
        self.assertEqual(envs.episode_steps.tolist(), [2, 2])
        envs.step_all([Action.DONE, Action.ROTATE_LEFT])
        self.assertEqual(envs.reset_done(), [0])
        self.assertEqual(envs.episode_steps.tolist(), [0, 3])


class TestRecords(unittest.TestCase):

    def test_write_and_read(self):
        spec = episode_specs(TaskKind.OBJECT_NAV, 1)[0]
        house, instruction = spec.build()
        actions = expert_rollout(house, instruction, spec.reset_seed)
        record = EpisodeRecord(spec=spec, instruction=instruction, actions=tuple(actions),  # noqa:E501
                               rewards=tuple([0.0] * (len(actions) - 1) + [1.0]), success=True)  # noqa:E501
        with TemporaryDirectory() as tempdir:
            path = os.path.join(tempdir, "episodes.jsonl")
            self.assertEqual(write_records(path, [record, record]), 2)
            loaded = read_records(path)
        self.assertEqual(loaded, [record, record])
        self.assertEqual(loaded[0].expert_length, len(actions))


if __name__ == "__main__":
    unittest.main()
