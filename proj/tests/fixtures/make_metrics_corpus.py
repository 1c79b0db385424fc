#!/usr/bin/env python3
# Copyright 2026 The ivrkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the frozen 50-transcript metrics corpus.

Each turn carries a hand-assigned outcome tag (ok, wrong, invalid). The
expected counts are tallied here, independently of the C++ metric code.
"""
import json
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent
FSM = json.loads((ROOT.parents[1] / "data" / "fsm" / "poi_verify.json").read_text())

# Outcome pattern per transcript, cycled; o = ok, w = wrong option, i = invalid output.
PATTERNS = ["oo", "ooo", "o", "ow", "io", "oio", "wo", "ooi", "oooo", "iio"]


def outgoing(state):
    return [i for i, t in enumerate(FSM["transitions"]) if t["source"] == state]


def query_of(state):
    return next(s["query"] for s in FSM["states"] if s["id"] == state)


def option_query(ti):
    t = FSM["transitions"][ti]
    return t.get("agent_query", query_of(t["target"]))


def main():
    rng = random.Random(20260115)
    transcripts = []
    for k in range(50):
        pattern = PATTERNS[k % len(PATTERNS)]
        state, asked, last_valid, retry = FSM["initial"], query_of(FSM["initial"]), None, 0
        turns = []
        for tag in pattern:
            if state in FSM["terminals"]:
                break
            out = outgoing(state)
            gt = rng.choice(out)
            reply = rng.choice(FSM["transitions"][gt]["reply_variants"])
            reply = reply["text"] if isinstance(reply, dict) else reply
            turn = {"state": state, "agent_query": asked, "user_reply": reply,
                    "ground_truth_transition": gt, "retry_count": 0,
                    "latency_ms": 0.0, "backend_ms": 0.0, "tag": tag}
            if tag == "i":
                if last_valid is None or retry == 3:
                    kind, q = "reissue_original", query_of(state)
                else:
                    kind, q = "repeat_last_valid", last_valid
                retry = 0 if retry == 3 else retry + 1
                turn.update(action_kind=kind, emitted_query=q, next_state=state, taken_transition=None)
            else:
                taken = gt if tag == "o" or len(out) == 1 else next(t for t in out if t != gt)
                q = option_query(taken)
                nxt = FSM["transitions"][taken]["target"]
                turn.update(action_kind="emit", emitted_query=q, next_state=nxt, taken_transition=taken)
                if tag == "w" and len(out) == 1:
                    turn["tag"] = "o"
                state, last_valid, retry = nxt, q, 0
            turn["retry_count"] = retry
            asked = turn["emitted_query"]
            turns.append(turn)
        transcripts.append({"session_id": f"hand-{k:02d}", "turns": turns})

    judgments = []
    for k in range(100):
        # Every third item, plus items 10..19, judged incorrect.
        correct = not (k % 3 == 0 or 10 <= k < 20)
        judgments.append({"sample_id": f"cr-{k:03d}", "correct": correct})

    n_t = sum(len(t["turns"]) for t in transcripts)
    n_s = sum(1 for t in transcripts for turn in t["turns"]
              if turn["action_kind"] == "emit"
              and turn["taken_transition"] == turn["ground_truth_transition"])
    n = len(judgments)
    n_c = sum(1 for j in judgments if j["correct"])

    with open(ROOT / "metrics_corpus" / "transcripts.jsonl", "w") as f:
        for t in transcripts:
            f.write(json.dumps(t) + "\n")
    with open(ROOT / "metrics_corpus" / "judgments.jsonl", "w") as f:
        for j in judgments:
            f.write(json.dumps(j) + "\n")
    expected = {"N": n, "N_C": n_c, "N_T": n_t, "N_S": n_s, "transcripts": len(transcripts)}
    (ROOT / "metrics_corpus" / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    print(expected)


if __name__ == "__main__":
    main()
