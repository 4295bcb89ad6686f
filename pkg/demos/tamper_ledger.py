"""Hash-chained match ledger: tamper detection and fork resolution.

Every consequential game action can be appended to a hash chain. Flipping
a single bit anywhere invalidates that block and everything after it, and
when peers disagree the longest valid chain wins.
"""

import time

from hackmatch import ledger


def build_chain(n: int):
    blocks = [ledger.make_genesis({"game": "g-demo", "event": "created"})]
    for i in range(1, n):
        blocks.append(ledger.make_block(blocks[-1], {"seq": i, "event": "status_report"}))
    return blocks


def main() -> None:
    chain = build_chain(8)
    ok, bad = ledger.verify_chain(chain)
    print(f"built a chain of {len(chain)} blocks: valid={ok}")
    print(f"tip hash: {chain[-1].hash.hex()[:24]}...\n")

    forged = list(chain)
    forged[4] = ledger.tamper_payload(chain[4], byte_index=3, bit=0)
    ok, bad = ledger.verify_chain(forged)
    print(f"after flipping one bit in block 4's payload: valid={ok}, "
          f"first bad block={bad}")

    # three peers: an honest full history, the forged copy, a laggard
    honest, laggard = chain, chain[:5]
    winner = ledger.resolve([forged, laggard, honest])
    print(f"resolve([forged(8), laggard(5), honest(8)]) -> "
          f"{len(winner)} blocks, tip {winner[-1].hash.hex()[:24]}...")
    print(f"picked the honest chain: {winner == honest}\n")

    # equal-length valid forks: the tie goes to the lexically lowest tip
    fork_a = chain[:6] + [ledger.make_block(chain[5], {"fork": "a"})]
    fork_b = chain[:6] + [ledger.make_block(chain[5], {"fork": "b"})]
    tie = ledger.resolve([fork_a, fork_b])
    low = min(fork_a[-1].hash.hex(), fork_b[-1].hash.hex())
    print(f"equal forks: winner tip {tie[-1].hash.hex()[:24]}... "
          f"(lowest of the two: {low[:24]}...)\n")

    bits = 12
    t0 = time.perf_counter()
    g = ledger.make_genesis({"hard": True}, difficulty_bits=bits)
    b = ledger.make_block(g, {"seq": 1}, difficulty_bits=bits)
    dt = time.perf_counter() - t0
    print(f"proof of work at {bits} leading zero bits: mined 2 blocks in {dt:.3f}s")
    print(f"  genesis {g.hash.hex()[:24]}... nonce={g.nonce}")
    print(f"  block 1 {b.hash.hex()[:24]}... nonce={b.nonce}")


if __name__ == "__main__":
    main()
