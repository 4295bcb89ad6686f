"""Player daemon and mock unit tests.

Socket-level tests bind ephemeral ports on 127.0.0.1. Daemon behavior is
mostly exercised on the in-memory attack surface so the suite stays fast and
port-collision free; one integration test hosts real TCP units end to end.
"""

import threading
import time

import pytest

from hackmatch.model import GamePhase, UnitClass, find_player, find_unit
from hackmatch.player import (
    ATTACK_TEMPLATES,
    PROBE_TIMEOUT,
    MockUnit,
    MockUnitService,
    PlayerDaemon,
    TcpSurface,
    VirtualSurface,
    probe_unit,
)
from hackmatch.server import GameServer

from conftest import make_config, start_two_player_game

FP_A = "a" * 64
FP_B = "b" * 64


@pytest.fixture
def service():
    svc = MockUnitService(0, FP_A, "letmein")
    yield svc
    svc.shutdown()


@pytest.fixture
def tcp():
    return TcpSurface()


class TestMockUnitService:
    def test_ping_pong(self, service, tcp):
        assert tcp.probe(service.host, service.port) == 200

    def test_exploit_right_key_reveals_flag(self, service, tcp):
        assert tcp.exploit(service.host, service.port, "letmein") == f"FLAG {FP_A}"

    def test_exploit_wrong_key_denied(self, service, tcp):
        reply = tcp.exploit(service.host, service.port, "wrong")
        assert reply == "DENIED"
        assert FP_A not in reply

    def test_empty_key_denied(self, service, tcp):
        assert tcp.exploit(service.host, service.port, "") == "DENIED"

    def test_garbage_gets_err(self, service, tcp):
        import socket

        with socket.create_connection((service.host, service.port), timeout=1.0) as conn:
            conn.sendall(b"MAKE ME A SANDWICH\n")
            assert conn.recv(64).strip() == b"ERR"

    def test_kill_says_bye_and_goes_dark(self, tcp):
        svc = MockUnitService(0, FP_A, "k")
        assert tcp.kill(svc.host, svc.port) == "BYE"
        assert not svc.running
        # the accept loop notices the stop flag within its poll interval;
        # the wide deadline only matters on a heavily loaded machine
        deadline = time.monotonic() + 4.0 + PROBE_TIMEOUT
        while time.monotonic() < deadline:
            if tcp.probe(svc.host, svc.port) == 400:
                break
            time.sleep(0.05)
        assert tcp.probe(svc.host, svc.port) == 400

    def test_hanging_service_probes_400(self, tcp):
        svc = MockUnitService(0, FP_A, "k", hang=True)
        try:
            t0 = time.monotonic()
            assert tcp.probe(svc.host, svc.port) == 400
            # the probe gave up on its own timeout, not the 5s server hang
            assert time.monotonic() - t0 < 1.0
        finally:
            svc.shutdown()

    def test_unbound_port_probes_400(self, tcp):
        svc = MockUnitService(0, FP_A, "k")
        port = svc.port
        svc.shutdown()
        time.sleep(0.3)
        assert tcp.probe("127.0.0.1", port) == 400
        assert tcp.exploit("127.0.0.1", port, "k") == "DOWN"
        assert tcp.kill("127.0.0.1", port) == "DOWN"


class TestMockUnit:
    def test_flag_file_holds_fingerprint(self, tmp_path):
        unit = MockUnit("cafe" * 4, 0, FP_A, "k", flag_dir=str(tmp_path))
        try:
            assert unit.fingerprint == FP_A
            assert (tmp_path / f"{unit.unit_id}.flag").read_text() == FP_A
        finally:
            unit.kill()

    def test_probe_unit_round_trip(self, tmp_path, tcp):
        unit = MockUnit("beef" * 4, 0, FP_A, "k", flag_dir=str(tmp_path))
        try:
            assert probe_unit(unit, tcp) == 200
        finally:
            unit.kill()

    def test_kill_stops_the_service(self, tmp_path, tcp):
        unit = MockUnit("f00d" * 4, 0, FP_A, "k", flag_dir=str(tmp_path))
        unit.kill()
        assert not unit.process.running


class TestVirtualSurface:
    def test_probe_up_and_down(self):
        surface = VirtualSurface()
        surface.add("10.0.0.1", 3001, FP_A, "k")
        assert surface.probe("10.0.0.1", 3001) == 200
        assert surface.probe("10.0.0.1", 9999) == 400
        assert surface.probe("10.0.0.2", 3001) == 400

    def test_exploit_semantics(self):
        surface = VirtualSurface()
        surface.add("h", 1, FP_A, "k")
        assert surface.exploit("h", 1, "k") == f"FLAG {FP_A}"
        assert surface.exploit("h", 1, "bad") == "DENIED"
        assert surface.exploit("h", 2, "k") == "DOWN"

    def test_kill_semantics(self):
        surface = VirtualSurface()
        surface.add("h", 1, FP_A, "k")
        assert surface.kill("h", 1) == "BYE"
        assert surface.probe("h", 1) == 400
        assert surface.kill("h", 1) == "DOWN"
        assert surface.exploit("h", 1, "k") == "DOWN"

    def test_parity_with_tcp_surface(self, tcp):
        """The same attack script must read identically on both surfaces."""

        def script(surface, host, port):
            out = [
                surface.probe(host, port),
                surface.exploit(host, port, "nope"),
                surface.exploit(host, port, "sesame"),
                surface.kill(host, port),
            ]
            deadline = time.monotonic() + 1.0 + PROBE_TIMEOUT
            while time.monotonic() < deadline:
                if surface.probe(host, port) == 400:
                    break
                time.sleep(0.05)
            out.append(surface.probe(host, port))
            out.append(surface.exploit(host, port, "sesame"))
            return out

        svc = MockUnitService(0, FP_B, "sesame")
        try:
            real = script(tcp, svc.host, svc.port)
        finally:
            svc.shutdown()

        virtual_surface = VirtualSurface()
        virtual_surface.add("10.0.0.9", 3001, FP_B, "sesame")
        virtual = script(virtual_surface, "10.0.0.9", 3001)
        assert real == virtual
        assert virtual == [200, "DENIED", f"FLAG {FP_B}", "BYE", 400, "DOWN"]


def make_daemon(server, game_id, name, host, surface, clock=lambda: 0.0):
    """Registered daemon probing an in-memory surface, sim style."""
    daemon = PlayerDaemon(server, game_id, name, surface=surface,
                          host=host, host_units=False, clock=clock)
    daemon.register()
    for u in daemon.realm:
        surface.add(host, u["port"], u["fingerprint"], u["vuln_key"])
    return daemon


@pytest.fixture
def duel(server):
    """Two registered daemons over one virtual surface, game running."""
    config = make_config()
    _, _, state = start_two_player_game(server, config)
    surface = VirtualSurface()
    alice = make_daemon(server, state.game_id, "alice", "10.0.0.1", surface)
    bob = make_daemon(server, state.game_id, "bob", "10.0.0.2", surface)
    return server, state, surface, alice, bob


class TestDaemonLifecycle:
    def test_register_learns_opponent_and_realm(self, duel):
        server, state, surface, alice, bob = duel
        assert alice.opponent == "bob"
        assert len(alice.realm) == 3
        own = {u.unit_id for u in find_player(state, "alice").realm.units}
        assert {u["id"] for u in alice.realm} == own

    def test_register_unknown_player_refused(self, server, config):
        state = server.create_game(config, ["alice", "bob"])
        daemon = PlayerDaemon(server, state.game_id, "mallory",
                              surface=VirtualSurface(), host_units=False,
                              clock=lambda: 0.0)
        with pytest.raises(RuntimeError, match="unknown player"):
            daemon.register()

    def test_get_opponent_ip(self, duel):
        _, _, _, alice, bob = duel
        assert alice.get_opponent_ip() == "10.0.0.2"
        assert bob.get_opponent_ip() == "10.0.0.1"

    def test_get_flags_lists_exactly_own_fingerprints(self, duel):
        _, state, _, alice, bob = duel
        own = {u.fingerprint for u in find_player(state, "alice").realm.units}
        theirs = {u.fingerprint for u in find_player(state, "bob").realm.units}
        flags = set(alice.get_flags())
        assert flags == own
        assert not flags & theirs


class TestProbingAndReporting:
    def test_probe_all_reports_200_for_live_services(self, duel):
        _, _, _, alice, _ = duel
        codes = alice.probe_all()
        assert len(codes) == 3
        assert set(codes.values()) == {200}

    def test_downed_service_probes_400(self, duel):
        _, _, surface, alice, _ = duel
        victim = alice.realm[0]
        surface.services[("10.0.0.1", victim["port"])].up = False
        codes = alice.probe_all()
        assert codes[victim["id"]] == 400

    def test_report_once_applies_decay_on_server(self, duel):
        server, state, surface, alice, _ = duel
        victim = alice.realm[0]
        surface.services[("10.0.0.1", victim["port"])].up = False
        out = alice.report_once(now=4.0)
        assert find_unit(out, victim["id"]).health == pytest.approx(96.0)

    def test_report_carries_all_units_and_counter(self, duel):
        _, _, _, alice, _ = duel
        msg = alice.build_status_report(now=1.0)
        assert msg.player_name == "alice"
        assert msg.ip == "10.0.0.1"
        assert len(msg.units) == 3
        assert msg.cmds == {"reports": 0}
        alice.report_once(now=1.0)
        assert alice.build_status_report(now=2.0).cmds == {"reports": 1}

    def test_observe_score_tracks_server_truth(self, duel):
        server, state, surface, alice, _ = duel
        victim = alice.realm[0]
        surface.services[("10.0.0.1", victim["port"])].up = False
        alice.report_once(now=10.0)
        alice.observe_score(server.score_update(state.game_id, now=10.0))
        assert alice.known_health[victim["id"]] == pytest.approx(90.0)


class TestEnterUnit:
    def test_healthy_unit_grants_session(self, duel):
        _, _, _, alice, _ = duel
        token = alice.enter_unit(alice.realm[0]["id"])
        assert token.startswith(f"sess-{alice.realm[0]['id']}-")

    def test_dead_unit_refused(self, duel):
        _, _, _, alice, _ = duel
        uid = alice.realm[0]["id"]
        alice.known_health[uid] = 0.0
        with pytest.raises(ValueError, match="down"):
            alice.enter_unit(uid)

    def test_foreign_unit_refused(self, duel):
        _, _, _, alice, bob = duel
        with pytest.raises(KeyError, match="not our unit"):
            alice.enter_unit(bob.realm[0]["id"])


class TestAttackTemplates:
    def test_template_names_frozen(self):
        assert ATTACK_TEMPLATES == ("liveness-flood", "kill-request", "key-guess")

    def test_unknown_template_rejected(self, duel):
        _, _, _, alice, _ = duel
        with pytest.raises(ValueError, match="unknown template"):
            alice.attack_unit(3001, "zero-day")

    def test_liveness_flood_counts_answers(self, duel):
        _, _, _, alice, bob = duel
        port = bob.realm[0]["port"]
        assert alice.attack_unit(port, "liveness-flood") == "flood 5/5 answered"

    def test_liveness_flood_against_dead_port(self, duel):
        _, _, _, alice, _ = duel
        assert alice.attack_unit(19999, "liveness-flood") == "flood 0/5 answered"

    def test_kill_request_downs_the_target(self, duel):
        server, state, surface, alice, bob = duel
        port = bob.realm[0]["port"]
        assert alice.attack_unit(port, "kill-request") == "BYE"
        assert surface.probe("10.0.0.2", port) == 400
        out = bob.report_once(now=5.0)
        assert find_unit(out, bob.realm[0]["id"]).health == pytest.approx(95.0)

    def test_key_guess_with_wrong_key_reveals_nothing(self, duel):
        _, _, _, alice, bob = duel
        reply = alice.attack_unit(bob.realm[0]["port"], "key-guess",
                                  key="not-the-key")
        assert reply == "DENIED"
        assert bob.realm[0]["fingerprint"] not in reply

    def test_key_guess_from_own_realm_finds_flag(self, duel):
        _, _, _, alice, bob = duel
        target = bob.realm[0]
        reply = alice.attack_unit(target["port"], "key-guess")
        assert reply == f"FLAG {target['fingerprint']}"

    def test_key_guess_against_dead_target(self, duel):
        _, _, surface, alice, bob = duel
        port = bob.realm[0]["port"]
        surface.services[("10.0.0.2", port)].up = False
        assert alice.attack_unit(port, "key-guess") == "DOWN"


class TestCaptureFlow:
    def test_exploit_then_capture_destroys_unit(self, duel):
        server, state, surface, alice, bob = duel
        target = bob.realm[0]
        reply = alice.attack_unit(target["port"], "key-guess")
        assert reply.startswith("FLAG ")
        claimed = reply.split(" ", 1)[1]
        assert alice.capture_unit(claimed, now=3.0) is True
        unit = find_unit(server.game(state.game_id), target["id"])
        assert unit.health == 0.0 and not unit.alive

    def test_recapture_refused(self, duel):
        server, state, surface, alice, bob = duel
        fp = bob.realm[0]["fingerprint"]
        assert alice.capture_unit(fp, now=1.0) is True
        assert alice.capture_unit(fp, now=2.0) is False

    def test_made_up_fingerprint_refused(self, duel):
        _, _, _, alice, _ = duel
        assert alice.capture_unit("0" * 64, now=1.0) is False

    def test_capturing_whole_realm_wins(self, duel):
        server, state, surface, alice, bob = duel
        for i, u in enumerate(bob.realm):
            assert alice.capture_unit(u["fingerprint"], now=float(i)) is True
        final = server.game(state.game_id)
        assert final.phase == GamePhase.FINISHED
        assert final.winner == "alice"


class TestCommandSubmission:
    def test_submit_command_lands_in_server_log(self, duel):
        server, state, _, alice, _ = duel
        alice.submit_command("nmap -Pn 10.0.0.2", now=1.0)
        alice.submit_command("frobnicate", valid=False, now=2.0)
        log = server.command_log(state.game_id, "alice")
        assert [(e.text, e.valid) for e in log] == [
            ("nmap -Pn 10.0.0.2", True), ("frobnicate", False)]


HIGH_PORTS = [
    UnitClass(class_id="t-echo", name="echo-sploit", service_port=47651,
              vuln_key="k-echo", description="test class"),
    UnitClass(class_id="t-form", name="form-sploit", service_port=47652,
              vuln_key="k-form", description="test class"),
    UnitClass(class_id="t-ping", name="ping-sploit", service_port=47653,
              vuln_key="k-ping", description="test class"),
]


class TestHostedUnitsEndToEnd:
    def test_real_sockets_full_round(self, tmp_path):
        """Hosted TCP units: probe 200, kill, next report within one interval
        plus the probe timeout books the 400."""
        server = GameServer()
        config = make_config(report_interval=1.0)
        state = server.create_game(config, ["alice", "bob"],
                                   class_pool=HIGH_PORTS, units_per_player=2,
                                   host_addresses={"alice": "127.0.0.1",
                                                   "bob": "127.0.0.1"})
        gid = state.game_id
        clock = {"t": 0.0}
        alice = PlayerDaemon(server, gid, "alice", surface=TcpSurface(),
                             flag_dir=str(tmp_path / "a"), host="127.0.0.1",
                             clock=lambda: clock["t"])
        try:
            alice.register()
            server.register_player(gid, "bob", host="127.0.0.1", now=0.0)
            server.start_game(gid, now=0.0)

            codes = alice.probe_all()
            assert set(codes.values()) == {200}
            state = alice.report_once(now=1.0)
            assert all(u.health == 100.0
                       for u in find_player(state, "alice").realm.units)

            # flags served over the wire match the hosted flag files
            victim = alice.realm[0]
            surface = TcpSurface()
            reply = surface.exploit("127.0.0.1", victim["port"],
                                    victim["vuln_key"])
            assert reply == f"FLAG {victim['fingerprint']}"
            assert victim["fingerprint"] in alice.get_flags()

            # kill one unit; it must read 400 within interval + probe timeout
            assert surface.kill("127.0.0.1", victim["port"]) == "BYE"
            deadline = time.monotonic() + 1.0 + PROBE_TIMEOUT
            down = False
            while time.monotonic() < deadline and not down:
                down = alice.probe_all()[victim["id"]] == 400
            assert down
            state = alice.report_once(now=2.0)
            assert find_unit(state, victim["id"]).health == pytest.approx(99.0)
        finally:
            alice.shutdown()

    def test_run_loop_reports_until_stopped(self, tmp_path):
        server = GameServer()
        config = make_config(report_interval=0.05)
        state = server.create_game(config, ["alice", "bob"],
                                   class_pool=HIGH_PORTS, units_per_player=2,
                                   host_addresses={"alice": "127.0.0.1",
                                                   "bob": "127.0.0.1"})
        gid = state.game_id
        surface = VirtualSurface()
        alice = PlayerDaemon(server, gid, "alice", surface=surface,
                             host="127.0.0.1", host_units=False)
        alice.register()
        for u in alice.realm:
            surface.add("127.0.0.1", u["port"], u["fingerprint"], u["vuln_key"])
        server.register_player(gid, "bob", host="127.0.0.1")
        server.start_game(gid)
        stop = threading.Event()
        worker = threading.Thread(target=alice.run, args=(stop, 0.05),
                                  daemon=True)
        worker.start()
        time.sleep(0.35)
        stop.set()
        worker.join(timeout=2.0)
        assert not worker.is_alive()
        assert alice._report_count >= 3
