"""Game server tests: lobby flow, report-driven decay, captures, clocks,
victory rules, pausing, staleness, reshuffles, events, and the ledger hookup.

Every operation is driven with an explicit virtual ``now`` so each scenario
is a deterministic script rather than a sleep-based race.
"""

import pytest

from hackmatch.ledger import load_chain, verify_chain
from hackmatch.metrics import CommandEvent, EventKind
from hackmatch.model import GameMode, GamePhase, find_player, find_unit, game_units
from hackmatch.protocol import CaptureSubmission, StatusReport, UnitReport
from hackmatch.server import GameServer, MatchClock

from conftest import make_config, start_two_player_game


def unit_ids(state, player):
    return [u.unit_id for u in find_player(state, player).realm.units]


def report(server, game_id, state, player, t, down=(), omit=(), client_t=None):
    """Send a status report at receive time t. Units in ``down`` get code 400,
    units in ``omit`` are left out entirely, the rest report 200."""
    p = find_player(server.game(game_id), player)
    entries = tuple(
        UnitReport(code=400 if u.unit_id in down else 200,
                   id=u.unit_id, health=u.health, port=u.port)
        for u in p.realm.units
        if u.unit_id not in omit
    )
    msg = StatusReport(timestamp=t if client_t is None else client_t,
                       ip=p.host_address, player_name=player, units=entries)
    return server.handle_status_report(game_id, msg, received_at=t)


def healths(state, player):
    return [u.health for u in find_player(state, player).realm.units]


class TestMatchClock:
    def test_elapsed_accumulates_between_advances(self):
        c = MatchClock(GameMode.OBJECTIVE)
        c.start(0.0, ["a", "b"])
        c.advance(4.0)
        c.advance(10.0)
        assert c.elapsed == pytest.approx(10.0)

    def test_time_mode_expiry(self):
        c = MatchClock(GameMode.TIME, time_limit=30.0)
        c.start(0.0, ["a", "b"])
        c.advance(29.0)
        assert not c.expired()
        c.advance(30.0)
        assert c.expired()

    def test_speed_mode_requires_budget(self):
        c = MatchClock(GameMode.SPEED)
        with pytest.raises(ValueError):
            c.start(0.0, ["a", "b"])

    def test_speed_burns_only_active_player(self):
        c = MatchClock(GameMode.SPEED, budget=10.0)
        c.start(0.0, ["a", "b"])
        assert c.active_player == "a"
        c.advance(3.0)
        assert c.remaining["a"] == pytest.approx(7.0)
        assert c.remaining["b"] == pytest.approx(10.0)

    def test_press_switches_active(self):
        c = MatchClock(GameMode.SPEED, budget=10.0)
        c.start(0.0, ["a", "b"])
        c.press("a", "b", 2.0)
        assert c.active_player == "b"
        c.advance(5.0)
        assert c.remaining == pytest.approx({"a": 8.0, "b": 7.0})

    def test_press_by_inactive_raises(self):
        c = MatchClock(GameMode.SPEED, budget=10.0)
        c.start(0.0, ["a", "b"])
        with pytest.raises(ValueError, match="not the active player"):
            c.press("b", "a", 1.0)

    def test_exhausted_lists_players_out_of_budget(self):
        c = MatchClock(GameMode.SPEED, budget=5.0)
        c.start(0.0, ["a", "b"])
        c.advance(5.0)
        assert c.exhausted() == ["a"]

    def test_pause_freezes_elapsed(self):
        c = MatchClock(GameMode.TIME, time_limit=60.0)
        c.start(0.0, ["a", "b"])
        c.advance(10.0)
        c.pause(12.0)
        c.advance(50.0)  # ignored while paused
        assert c.elapsed == pytest.approx(12.0)
        c.resume(100.0)
        c.advance(105.0)
        assert c.elapsed == pytest.approx(17.0)

    def test_view_shapes(self):
        c = MatchClock(GameMode.SPEED, budget=5.0)
        c.start(0.0, ["a", "b"])
        c.advance(6.0)
        v = c.view()
        assert v["mode"] == "speed"
        assert v["active_player"] == "a"
        assert v["remaining"]["a"] == 0.0  # clamped for display
        t = MatchClock(GameMode.TIME, time_limit=30.0)
        t.start(0.0, ["a", "b"])
        assert t.view()["time_limit"] == 30.0


class TestLobby:
    def test_register_unknown_player_refused(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        out = server.register_player(state.game_id, "mallory", now=0.0)
        assert not out.ok
        assert out.reason == "unknown player"

    def test_register_reports_opponent(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        out = server.register_player(state.game_id, "alice", now=0.0)
        assert out.ok and out.opponent == "bob"

    def test_register_updates_host_and_notifies_opponent(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        sub = server.bus.subscribe(f"game/{state.game_id}/player/bob/opponent")
        server.register_player(state.game_id, "alice", host="10.9.9.9", now=0.0)
        _, msg = sub.poll()
        assert msg.opponent == "alice" and msg.host == "10.9.9.9"
        assert find_player(server.game(state.game_id), "alice").host_address == "10.9.9.9"

    def test_start_requires_all_registered(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        server.register_player(state.game_id, "alice", now=0.0)
        with pytest.raises(ValueError, match="not registered"):
            server.start_game(state.game_id, now=0.0)

    def test_start_moves_to_running(self, server, config):
        _, _, state = start_two_player_game(server, config)
        assert state.phase == GamePhase.RUNNING
        assert state.started_at == 0.0

    def test_start_twice_rejected(self, server, config):
        _, _, state = start_two_player_game(server, config)
        with pytest.raises(ValueError, match="not lobby"):
            server.start_game(state.game_id, now=1.0)

    def test_duplicate_game_id_rejected(self, server, config):
        server.create_game(config, ["alice", "bob"], game_id="g-dup")
        with pytest.raises(ValueError, match="already exists"):
            server.create_game(config, ["alice", "bob"], game_id="g-dup")

    def test_unknown_game_raises(self, server):
        with pytest.raises(KeyError):
            server.game("missing")

    def test_game_ids_sorted(self, server, config):
        for gid in ("g-c", "g-a", "g-b"):
            server.create_game(config, ["alice", "bob"], game_id=gid)
        assert server.game_ids() == ["g-a", "g-b", "g-c"]


class TestReportIngestion:
    def test_one_second_of_downtime_costs_one_point(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 1.0, down={victim})
        assert find_unit(state, victim).health == pytest.approx(99.0)

    def test_up_units_keep_health(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 1.0, down={victim})
        assert healths(state, "alice").count(100.0) == 2
        assert healths(state, "bob") == [100.0, 100.0, 100.0]

    def test_decay_spans_accumulate_across_reports(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        for t in (1.0, 2.0, 3.5, 7.25):
            state = report(server, gid, state, "alice", t, down={victim})
        assert find_unit(state, victim).health == pytest.approx(100.0 - 7.25)

    def test_recovered_unit_stops_bleeding(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 5.0, down={victim})
        state = report(server, gid, state, "alice", 9.0)  # back up
        state = report(server, gid, state, "alice", 12.0)
        u = find_unit(state, victim)
        assert u.health == pytest.approx(95.0)  # the up spans cost nothing
        assert u.status_code == 200

    def test_duplicate_report_costs_nothing(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 2.0, down={victim}, client_t=77.0)
        before = find_unit(state, victim).health
        # identical client timestamp = retransmission, even if it arrives later
        state = report(server, gid, state, "alice", 6.0, down={victim}, client_t=77.0)
        assert find_unit(state, victim).health == before

    def test_damage_uses_receive_time_not_client_time(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        # client clock claims an hour has passed; the server saw 2 seconds
        state = report(server, gid, state, "alice", 2.0, down={victim}, client_t=3600.0)
        assert find_unit(state, victim).health == pytest.approx(98.0)

    def test_omitted_unit_charged_as_down(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        quiet = unit_ids(state, "alice")[2]
        state = report(server, gid, state, "alice", 4.0, omit={quiet})
        assert find_unit(state, quiet).health == pytest.approx(96.0)
        assert find_unit(state, quiet).status_code == 400

    def test_unknown_player_rejected_state_unchanged(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        msg = StatusReport(timestamp=1.0, ip="10.0.0.9", player_name="mallory")
        with pytest.raises(KeyError):
            server.handle_status_report(gid, msg, received_at=1.0)
        after = server.game(gid)
        assert after == state

    def test_report_naming_foreign_units_rejected(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        foreign = unit_ids(state, "bob")[0]
        p = find_player(state, "alice")
        msg = StatusReport(
            timestamp=1.0, ip=p.host_address, player_name="alice",
            units=(UnitReport(code=400, id=foreign, health=100.0, port=1),),
        )
        with pytest.raises(KeyError, match="unknown units"):
            server.handle_status_report(gid, msg, received_at=1.0)
        assert server.game(gid) == state

    def test_report_before_start_rejected(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        msg = StatusReport(timestamp=1.0, ip="10.0.0.1", player_name="alice")
        with pytest.raises(ValueError, match="not running"):
            server.handle_status_report(state.game_id, msg, received_at=1.0)

    def test_dead_unit_not_charged_again(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 150.0, down={victim})
        assert find_unit(state, victim).health == 0.0
        tick_before = state.tick
        state = report(server, gid, state, "alice", 160.0, down={victim})
        assert find_unit(state, victim).health == 0.0
        assert state.tick == tick_before  # nothing alive to charge

    def test_sudden_death_one_bad_probe_destroys(self, server):
        config = make_config(default_health=1)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        # zero elapsed time: a regular game would charge nothing here
        state = report(server, gid, state, "alice", 0.0, down={victim})
        u = find_unit(state, victim)
        assert u.health == 0.0
        assert not u.alive


class TestCaptures:
    def _game(self, server, config=None):
        _, _, state = start_two_player_game(server, config or make_config())
        return state

    def _fingerprint(self, state, player, idx=0):
        return find_player(state, player).realm.units[idx].fingerprint

    def test_valid_capture_zeroes_unit_instantly(self, server):
        state = self._game(server)
        gid = state.game_id
        fp = self._fingerprint(state, "bob")
        target = unit_ids(state, "bob")[0]
        verdict = server.handle_capture(
            gid, CaptureSubmission(attacker="alice", claimed_fingerprint=fp,
                                   timestamp=3.0), now=3.0)
        assert verdict.accepted
        assert verdict.unit_id == target
        assert verdict.reason == "proof accepted"
        u = find_unit(server.game(gid), target)
        assert u.health == 0.0 and not u.alive

    def test_capture_advances_tick(self, server):
        state = self._game(server)
        fp = self._fingerprint(state, "bob")
        before = server.game(state.game_id).tick
        server.handle_capture(state.game_id,
                              CaptureSubmission(attacker="alice",
                                                claimed_fingerprint=fp,
                                                timestamp=1.0), now=1.0)
        assert server.game(state.game_id).tick == before + 1

    def test_malformed_fingerprint_rejected(self, server):
        state = self._game(server)
        for bad in ("", "xyz", "f" * 63, "F" * 64, "g" * 64):
            verdict = server.handle_capture(
                state.game_id,
                CaptureSubmission(attacker="alice", claimed_fingerprint=bad,
                                  timestamp=1.0), now=1.0)
            assert not verdict.accepted
            assert verdict.reason == "malformed fingerprint"

    def test_own_fingerprint_rejected(self, server):
        state = self._game(server)
        fp = self._fingerprint(state, "alice")
        verdict = server.handle_capture(
            state.game_id,
            CaptureSubmission(attacker="alice", claimed_fingerprint=fp,
                              timestamp=1.0), now=1.0)
        assert not verdict.accepted
        assert verdict.reason == "own fingerprint"

    def test_unknown_fingerprint_rejected(self, server):
        state = self._game(server)
        verdict = server.handle_capture(
            state.game_id,
            CaptureSubmission(attacker="alice", claimed_fingerprint="0" * 64,
                              timestamp=1.0), now=1.0)
        assert not verdict.accepted
        assert verdict.reason == "no matching unit"

    def test_unknown_attacker_rejected(self, server):
        state = self._game(server)
        fp = self._fingerprint(state, "bob")
        verdict = server.handle_capture(
            state.game_id,
            CaptureSubmission(attacker="mallory", claimed_fingerprint=fp,
                              timestamp=1.0), now=1.0)
        assert not verdict.accepted
        assert verdict.reason == "unknown attacker"

    def test_double_capture_rejected(self, server):
        state = self._game(server)
        fp = self._fingerprint(state, "bob")
        sub = CaptureSubmission(attacker="alice", claimed_fingerprint=fp,
                                timestamp=1.0)
        assert server.handle_capture(state.game_id, sub, now=1.0).accepted
        verdict = server.handle_capture(
            state.game_id,
            CaptureSubmission(attacker="alice", claimed_fingerprint=fp,
                              timestamp=2.0), now=2.0)
        assert not verdict.accepted
        assert verdict.reason == "unit already destroyed"

    def test_capture_rejected_before_start(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        verdict = server.handle_capture(
            state.game_id,
            CaptureSubmission(attacker="alice", claimed_fingerprint="0" * 64,
                              timestamp=0.0), now=0.0)
        assert not verdict.accepted
        assert verdict.reason == "game is not running"

    def test_capture_rejected_while_paused(self, server):
        state = self._game(server)
        fp = self._fingerprint(state, "bob")
        server.pause_game(state.game_id, now=1.0)
        verdict = server.handle_capture(
            state.game_id,
            CaptureSubmission(attacker="alice", claimed_fingerprint=fp,
                              timestamp=2.0), now=2.0)
        assert not verdict.accepted
        assert verdict.reason == "game is paused"

    def test_capturing_every_unit_wins_the_match(self, server):
        state = self._game(server)
        gid = state.game_id
        for i in range(3):
            fp = self._fingerprint(state, "bob", i)
            verdict = server.handle_capture(
                gid, CaptureSubmission(attacker="alice",
                                       claimed_fingerprint=fp,
                                       timestamp=float(i)), now=float(i))
            assert verdict.accepted
        final = server.game(gid)
        assert final.phase == GamePhase.FINISHED
        assert final.winner == "alice"

    def test_capture_after_finish_rejected(self, server):
        state = self._game(server)
        gid = state.game_id
        for i in range(3):
            server.handle_capture(
                gid, CaptureSubmission(attacker="alice",
                                       claimed_fingerprint=self._fingerprint(state, "bob", i),
                                       timestamp=float(i)), now=float(i))
        verdict = server.handle_capture(
            gid, CaptureSubmission(attacker="bob",
                                   claimed_fingerprint=self._fingerprint(state, "alice"),
                                   timestamp=9.0), now=9.0)
        assert not verdict.accepted
        assert verdict.reason == "game is not running"


class TestObjectiveVictory:
    def test_starving_out_one_realm_ends_the_match(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        down = set(unit_ids(state, "bob"))
        state = report(server, gid, state, "bob", 100.0, down=down)
        assert state.phase == GamePhase.FINISHED
        assert state.winner == "alice"

    def test_partial_defeat_fraction(self, server):
        config = make_config(defeat_fraction=2 / 3)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        down = set(unit_ids(state, "bob")[:2])
        state = report(server, gid, state, "bob", 100.0, down=down)
        assert state.phase == GamePhase.FINISHED
        assert state.winner == "alice"

    def test_below_threshold_keeps_running(self, server):
        config = make_config(defeat_fraction=2 / 3)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        down = set(unit_ids(state, "bob")[:1])
        state = report(server, gid, state, "bob", 100.0, down=down)
        assert state.phase == GamePhase.RUNNING
        assert state.winner is None

    def test_mutual_destruction_is_a_draw(self, server, config):
        # both players silent: the stale sweep starves both realms in one pass
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        state = server.advance_time(gid, now=100.0)
        assert state.phase == GamePhase.FINISHED
        assert state.winner is None
        assert server.score_update(gid, now=100.0).draw is True

    def test_winner_event_carries_reason(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        sub = server.bus.subscribe(f"game/{gid}/player/alice/events")
        report(server, gid, state, "bob", 100.0, down=set(unit_ids(state, "bob")))
        kinds = {}
        for _, ev in sub.drain():
            kinds.setdefault(ev.kind, ev)
        assert "winner" in kinds
        data = kinds["winner"].data
        assert data["winner"] == "alice"
        assert data["draw"] is False
        assert data["reason"] == "last hacker alive"


class TestTimeVictory:
    def test_higher_health_sum_wins_at_expiry(self, server):
        config = make_config(GameMode.TIME, time_limit=200.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "bob")[0]
        state = report(server, gid, state, "bob", 50.0, down={victim})
        # both daemons keep reporting, so the stale sweep never fires
        state = report(server, gid, state, "alice", 199.0)
        state = report(server, gid, state, "bob", 199.0)
        state = server.advance_time(gid, now=200.0)
        assert state.phase == GamePhase.FINISHED
        assert state.winner == "alice"

    def test_no_winner_before_expiry(self, server):
        config = make_config(GameMode.TIME, time_limit=200.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        state = report(server, gid, state, "bob", 50.0,
                       down={unit_ids(state, "bob")[0]})
        state = server.advance_time(gid, now=199.0)
        assert state.phase == GamePhase.RUNNING

    def test_equal_sums_break_tie_on_units_alive(self, server):
        config = make_config(GameMode.TIME, time_limit=200.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        # alice: one unit down 100s -> (0,100,100), sum 200, 2 alive
        # bob: two units down 50s  -> (50,50,100), sum 200, 3 alive
        a0 = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 100.0, down={a0})
        b0, b1 = unit_ids(state, "bob")[:2]
        state = report(server, gid, state, "bob", 50.0, down={b0, b1})
        state = report(server, gid, state, "bob", 100.0)  # stop the bleed
        # keep both daemons fresh so the stale sweep stays out of the picture
        state = report(server, gid, state, "alice", 199.0)
        state = report(server, gid, state, "bob", 199.0)
        state = server.advance_time(gid, now=200.0)
        assert state.phase == GamePhase.FINISHED
        assert state.winner == "bob"

    def test_dead_even_expiry_is_a_draw(self, server):
        config = make_config(GameMode.TIME, time_limit=100.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        state = report(server, gid, state, "alice", 99.0)
        state = report(server, gid, state, "bob", 99.0)
        state = server.advance_time(gid, now=100.0)
        assert state.phase == GamePhase.FINISHED
        assert state.winner is None
        assert server.score_update(gid, now=100.0).draw is True


class TestSpeedVictory:
    def _speed_game(self, server, budget=5.0):
        config = make_config(GameMode.SPEED, clock_budget=budget)
        _, _, state = start_two_player_game(server, config)
        return state

    def test_press_swaps_active_player(self, server):
        state = self._speed_game(server)
        gid = state.game_id
        server.clock_press(gid, "alice", now=1.0)
        assert server.score_update(gid, now=1.0).clock["active_player"] == "bob"

    def test_press_by_inactive_player_rejected(self, server):
        state = self._speed_game(server)
        with pytest.raises(ValueError, match="not the active player"):
            server.clock_press(state.game_id, "bob", now=1.0)

    def test_press_outside_speed_mode_rejected(self, server, config):
        _, _, state = start_two_player_game(server, config)
        with pytest.raises(ValueError, match="speed mode"):
            server.clock_press(state.game_id, "alice", now=1.0)

    def test_slow_player_exhausts_budget_and_loses(self, server):
        state = self._speed_game(server, budget=5.0)
        gid = state.game_id
        # alice answers in 1s each move, bob needs 3s
        t, active = 0.0, "alice"
        while server.game(gid).phase == GamePhase.RUNNING and t < 50.0:
            t += 1.0 if active == "alice" else 3.0
            server.clock_press(gid, active, now=t)
            active = "bob" if active == "alice" else "alice"
            server.advance_time(gid, now=t)
        final = server.game(gid)
        assert final.phase == GamePhase.FINISHED
        assert final.winner == "alice"
        assert t == pytest.approx(8.0)

    def test_valid_command_is_a_move(self, server):
        state = self._speed_game(server)
        gid = state.game_id
        event = CommandEvent(player="alice", timestamp=1.0,
                             kind=EventKind.COMMAND, text="nmap 10.0.0.2")
        server.handle_command_event(gid, event, now=1.0)
        assert server.score_update(gid, now=1.0).clock["active_player"] == "bob"

    def test_invalid_command_is_not_a_move(self, server):
        state = self._speed_game(server)
        gid = state.game_id
        event = CommandEvent(player="alice", timestamp=1.0,
                             kind=EventKind.COMMAND, text="frobnicate",
                             valid=False)
        server.handle_command_event(gid, event, now=1.0)
        assert server.score_update(gid, now=1.0).clock["active_player"] == "alice"

    def test_inactive_players_command_does_not_press(self, server):
        state = self._speed_game(server)
        gid = state.game_id
        event = CommandEvent(player="bob", timestamp=1.0,
                             kind=EventKind.COMMAND, text="ls")
        server.handle_command_event(gid, event, now=1.0)
        assert server.score_update(gid, now=1.0).clock["active_player"] == "alice"

    def test_timeout_without_any_press(self, server):
        state = self._speed_game(server, budget=5.0)
        gid = state.game_id
        state = server.advance_time(gid, now=6.0)
        assert state.phase == GamePhase.FINISHED
        assert state.winner == "bob"


class TestPause:
    def test_paused_time_is_not_downtime(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 10.0, down={victim})  # -10
        server.pause_game(gid, now=10.0)
        server.resume_game(gid, now=110.0)  # 100s paused
        state = report(server, gid, state, "alice", 115.0, down={victim})
        # only the 5 unpaused seconds count
        assert find_unit(state, victim).health == pytest.approx(85.0)

    def test_reports_during_pause_charge_nothing(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        server.pause_game(gid, now=1.0)
        state = report(server, gid, state, "alice", 50.0, down={victim})
        assert find_unit(state, victim).health == 100.0

    def test_advance_time_during_pause_changes_nothing(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        server.pause_game(gid, now=1.0)
        state = server.advance_time(gid, now=500.0)
        assert state.phase == GamePhase.RUNNING
        assert all(u.health == 100.0 for u in game_units(state))

    def test_pause_freezes_speed_clocks(self, server):
        config = make_config(GameMode.SPEED, clock_budget=5.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        server.advance_time(gid, now=2.0)
        server.pause_game(gid, now=2.0)
        server.resume_game(gid, now=1000.0)
        server.advance_time(gid, now=1001.0)
        score = server.score_update(gid, now=1001.0)
        assert score.clock["remaining"]["alice"] == pytest.approx(2.0)
        assert server.game(gid).phase == GamePhase.RUNNING

    def test_double_pause_and_resume_are_idempotent(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        server.pause_game(gid, now=1.0)
        server.pause_game(gid, now=2.0)
        assert server.score_update(gid, now=2.0).paused is True
        server.resume_game(gid, now=3.0)
        server.resume_game(gid, now=4.0)
        assert server.score_update(gid, now=4.0).paused is False

    def test_pause_requires_running_game(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        with pytest.raises(ValueError):
            server.pause_game(state.game_id, now=0.0)


class TestStaleSweep:
    def test_silent_player_charged_after_threshold(self, server, config):
        # stale_factor 2.0 * report_interval 1.0 = 2s grace
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        state = server.advance_time(gid, now=2.0)
        assert all(h == 100.0 for h in healths(state, "alice"))
        state = server.advance_time(gid, now=2.5)
        assert healths(state, "alice") == pytest.approx([97.5] * 3)

    def test_silent_player_dies_at_health_over_dc(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        state = server.advance_time(gid, now=99.0)
        assert healths(state, "alice") == pytest.approx([1.0] * 3)
        state = server.advance_time(gid, now=100.0)
        assert healths(state, "alice") == [0.0] * 3

    def test_reporting_player_not_swept(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        for t in (1.0, 2.0, 3.0, 4.0):
            state = report(server, gid, state, "alice", t)
        state = server.advance_time(gid, now=4.5)
        assert healths(state, "alice") == [100.0] * 3
        # bob stayed silent the whole 4.5s
        assert healths(state, "bob") == pytest.approx([95.5] * 3)

    def test_sweep_charge_includes_already_accrued_silence(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        state = report(server, gid, state, "alice", 1.0)
        state = server.advance_time(gid, now=10.0)
        # silent since the t=1.0 report: charged 9s, not 10
        assert healths(state, "alice") == pytest.approx([91.0] * 3)


class TestEvents:
    def test_seq_strictly_increasing_and_fanned_out(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        gid = state.game_id
        sub_a = server.bus.subscribe(f"game/{gid}/player/alice/events")
        sub_b = server.bus.subscribe(f"game/{gid}/player/bob/events")
        for i, name in enumerate(("alice", "bob")):
            server.register_player(gid, name, host=f"10.0.0.{i+1}", now=0.0)
        server.start_game(gid, now=0.0)
        state = server.game(gid)
        report(server, gid, state, "alice", 1.0,
               down={unit_ids(state, "alice")[0]})
        events_a = [ev for _, ev in sub_a.drain()]
        events_b = [ev for _, ev in sub_b.drain()]
        seqs = [ev.seq for ev in events_a]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)
        # game-scoped events reach both players with identical seq numbers
        kinds_a = {ev.seq: ev.kind for ev in events_a}
        kinds_b = {ev.seq: ev.kind for ev in events_b}
        shared = set(kinds_a) & set(kinds_b)
        assert shared  # at least phase
        assert all(kinds_a[s] == kinds_b[s] for s in shared)

    def test_health_events_name_the_unit(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        sub = server.bus.subscribe(f"game/{gid}/player/alice/events")
        victim = unit_ids(state, "alice")[0]
        report(server, gid, state, "alice", 3.0, down={victim})
        health_events = [ev for _, ev in sub.drain() if ev.kind == "health"]
        assert len(health_events) == 1
        ev = health_events[0]
        assert ev.player == "alice"
        assert ev.data["unit"] == victim
        assert ev.data["health"] == pytest.approx(97.0)

    def test_tick_non_decreasing_across_events(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        sub = server.bus.subscribe(f"game/{gid}/player/bob/events")
        for t in (1.0, 2.0, 3.0):
            state = report(server, gid, state, "bob", t,
                           down={unit_ids(state, "bob")[0]})
        events = sorted((ev for _, ev in sub.drain()), key=lambda e: e.seq)
        ticks = [ev.tick for ev in events]
        assert ticks == sorted(ticks)


class TestReshuffle:
    def test_each_player_gets_a_fresh_unit_per_interval(self, server):
        config = make_config(reshuffle_interval=10.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        before = {n: set(unit_ids(state, n)) for n in ("alice", "bob")}
        sub = server.bus.subscribe(f"game/{gid}/player/+/events")
        state = server.advance_time(gid, now=10.0)
        after = {n: set(unit_ids(state, n)) for n in ("alice", "bob")}
        for n in ("alice", "bob"):
            assert len(after[n] - before[n]) == 1
            assert len(before[n] - after[n]) == 1
        shuffles = [ev for _, ev in sub.drain() if ev.kind == "reshuffle"]
        assert {ev.player for ev in shuffles} == {"alice", "bob"}
        for ev in shuffles:
            assert ev.data["old_unit"] in before[ev.player]
            assert ev.data["new_unit"] in after[ev.player]

    def test_fresh_unit_has_full_health(self, server):
        config = make_config(reshuffle_interval=5.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        victim = unit_ids(state, "alice")[0]
        state = report(server, gid, state, "alice", 4.0, down={victim})
        before = set(unit_ids(state, "alice"))
        state = server.advance_time(gid, now=5.0)
        fresh = set(unit_ids(state, "alice")) - before
        assert len(fresh) == 1
        assert find_unit(state, fresh.pop()).health == 100.0

    def test_no_reshuffle_without_interval(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        report(server, gid, state, "alice", 1.0)
        report(server, gid, state, "bob", 1.0)
        before = set(unit_ids(server.game(gid), "alice"))
        server.advance_time(gid, now=50.0)
        assert set(unit_ids(server.game(gid), "alice")) == before

    def test_missed_intervals_catch_up(self, server):
        config = make_config(reshuffle_interval=10.0)
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        report(server, gid, state, "alice", 1.0)
        report(server, gid, state, "bob", 1.0)
        sub = server.bus.subscribe(f"game/{gid}/player/alice/events")
        server.advance_time(gid, now=1.9)  # keep the sweep quiet
        sub.drain()
        # jump across three interval boundaries in one sweep
        state = report(server, gid, state, "alice", 2.0)
        state = report(server, gid, state, "bob", 2.0)
        # walk time forward with frequent reports so only reshuffles fire
        t = 2.0
        while t < 30.0:
            t += 1.0
            state = report(server, gid, state, "alice", t)
            state = report(server, gid, state, "bob", t)
            state = server.advance_time(gid, now=t)
        shuffles = [ev for _, ev in sub.drain() if ev.kind == "reshuffle"
                    and ev.player == "alice"]
        assert len(shuffles) == 3

    def test_deterministic_under_seed(self):
        picks = []
        for _ in range(2):
            server = GameServer()
            config = make_config(reshuffle_interval=10.0)
            _, _, state = start_two_player_game(server, config)
            state = server.advance_time(state.game_id, now=10.0)
            picks.append(tuple(sorted(u.unit_id for u in game_units(state))))
        assert picks[0] == picks[1]


class TestMultiGameIsolation:
    def test_damage_in_one_game_does_not_leak(self, server):
        c1 = make_config(rng_seed=1)
        c2 = make_config(rng_seed=2)
        _, _, s1 = start_two_player_game(server, c1, names=("alice", "bob"))
        _, _, s2 = start_two_player_game(server, c2, names=("carol", "dave"))
        report(server, s1.game_id, s1, "alice", 10.0,
               down=set(unit_ids(s1, "alice")))
        assert all(u.health == 100.0 for u in game_units(server.game(s2.game_id)))
        assert server.game(s2.game_id).phase == GamePhase.RUNNING

    def test_finishing_one_game_leaves_the_other_running(self, server):
        c1 = make_config(rng_seed=1)
        c2 = make_config(rng_seed=2)
        _, _, s1 = start_two_player_game(server, c1, names=("alice", "bob"))
        _, _, s2 = start_two_player_game(server, c2, names=("carol", "dave"))
        server.advance_time(s1.game_id, now=100.0)
        assert server.game(s1.game_id).phase == GamePhase.FINISHED
        assert server.game(s2.game_id).phase == GamePhase.RUNNING


class TestCommandStream:
    def test_commands_recorded_and_filtered(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        for t, (player, text) in enumerate([("alice", "ls"), ("bob", "pwd"),
                                            ("alice", "nmap 10.0.0.2")]):
            server.handle_command_event(
                gid, CommandEvent(player=player, timestamp=float(t),
                                  kind=EventKind.COMMAND, text=text),
                now=float(t))
        assert len(server.command_log(gid)) == 3
        assert [e.text for e in server.command_log(gid, "alice")] == [
            "ls", "nmap 10.0.0.2"]

    def test_unknown_player_rejected(self, server, config):
        _, _, state = start_two_player_game(server, config)
        with pytest.raises(KeyError):
            server.handle_command_event(
                state.game_id,
                CommandEvent(player="mallory", timestamp=1.0,
                             kind=EventKind.COMMAND, text="ls"), now=1.0)

    def test_timestamps_must_not_go_backwards(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        server.handle_command_event(
            gid, CommandEvent(player="alice", timestamp=5.0,
                              kind=EventKind.COMMAND, text="ls"), now=5.0)
        with pytest.raises(ValueError, match="non-decreasing"):
            server.handle_command_event(
                gid, CommandEvent(player="alice", timestamp=4.0,
                                  kind=EventKind.COMMAND, text="pwd"), now=6.0)

    def test_metrics_snapshot_counts_commands(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        for t in (10.0, 20.0, 30.0):
            server.handle_command_event(
                gid, CommandEvent(player="alice", timestamp=t,
                                  kind=EventKind.COMMAND, text="ls"), now=t)
        snap = server.metrics_snapshot(gid, "alice", now=60.0)
        assert snap.commands == 3
        assert snap.copm == pytest.approx(3.0)
        assert snap.consistency == pytest.approx(2 / 3)

    def test_score_update_embeds_metrics(self, server, config):
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        server.handle_command_event(
            gid, CommandEvent(player="alice", timestamp=30.0,
                              kind=EventKind.COMMAND, text="ls"), now=30.0)
        score = server.score_update(gid, now=60.0)
        assert score.players["alice"]["metrics"]["copm"] == pytest.approx(1.0)
        assert score.players["alice"]["health_sum"] == pytest.approx(300.0)
        assert score.players["alice"]["opponent"] == "bob"


class TestQueries:
    def test_opponent_info(self, server, config):
        _, _, state = start_two_player_game(server, config)
        info = server.opponent_info(state.game_id, "alice")
        assert info.opponent == "bob"
        assert info.host == "10.0.0.2"

    def test_realm_info_lists_own_secrets(self, server, config):
        _, _, state = start_two_player_game(server, config)
        info = server.realm_info(state.game_id, "alice")
        own = find_player(state, "alice").realm.units
        assert len(info.units) == len(own)
        by_id = {u.unit_id: u for u in own}
        keys = {c.class_id: c.vuln_key for c in state.class_pool}
        for entry in info.units:
            unit = by_id[entry["id"]]
            assert entry["fingerprint"] == unit.fingerprint
            assert entry["vuln_key"] == keys[unit.class_id]
            assert entry["port"] == unit.port

    def test_realm_info_unknown_player(self, server, config):
        _, _, state = start_two_player_game(server, config)
        with pytest.raises(KeyError):
            server.realm_info(state.game_id, "mallory")


class TestLedgerIntegration:
    def test_chain_grows_and_verifies(self, tmp_path):
        server = GameServer(decentralized=True, ledger_dir=str(tmp_path))
        config = make_config()
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        state = report(server, gid, state, "alice", 1.0)
        state = report(server, gid, state, "bob", 1.5)
        report(server, gid, state, "bob", 150.0,
               down=set(unit_ids(state, "bob")))
        chain = server.chain(gid)
        kinds = [b.record()["cmds"]["kind"] for b in chain]
        assert kinds[0] == "start"
        assert kinds.count("status_report") == 3
        assert kinds[-1] == "winner"
        assert verify_chain(chain) == (True, None)

    def test_chain_persisted_to_disk(self, tmp_path):
        server = GameServer(decentralized=True, ledger_dir=str(tmp_path))
        config = make_config()
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        report(server, gid, state, "alice", 1.0)
        loaded = load_chain(tmp_path / f"{gid}.chain")
        assert loaded == server.chain(gid)
        assert verify_chain(loaded) == (True, None)

    def test_report_blocks_carry_unit_lines(self, tmp_path):
        server = GameServer(decentralized=True, ledger_dir=str(tmp_path))
        config = make_config()
        _, _, state = start_two_player_game(server, config)
        gid = state.game_id
        report(server, gid, state, "alice", 1.0)
        block = server.chain(gid)[-1]
        rec = block.record()
        assert rec["playerName"] == "alice"
        assert rec["ip"] == "10.0.0.1"
        assert len(rec["units"]) == 3
        assert {"code", "id", "health", "port"} <= set(rec["units"][0])

    def test_centralized_games_skip_the_chain(self, server, config):
        _, _, state = start_two_player_game(server, config)
        assert server.chain(state.game_id) == []

    def test_difficulty_bits_respected(self):
        server = GameServer(decentralized=True, difficulty_bits=8)
        config = make_config()
        _, _, state = start_two_player_game(server, config)
        chain = server.chain(state.game_id)
        assert chain
        assert all(b.hash[0] == 0 for b in chain)
        assert verify_chain(chain, difficulty_bits=8) == (True, None)
