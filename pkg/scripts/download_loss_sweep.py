#!/usr/bin/env python3
"""Sweep the download-link loss rate and report bulk losses and the
retransmission cost of completing each transfer.

Every run still ends with a gap-free record set; the sweep shows how much
the send-and-wait recovery phase has to work for it.
"""
from __future__ import annotations

import argparse
import random

from soilnet.channel import LinkModel
from soilnet.collector import run_download
from soilnet.motesim import FlashRing, MoteState, SampleRecord


def build_ring(n: int) -> FlashRing:
    ring = FlashRing()
    for i in range(n):
        ring.append(SampleRecord(i, 60 * i, (i % 1024, 1, 2, 3, 4)))
    return ring


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--records", type=int, default=11_811)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--losses", default="0,0.058,0.1,0.3,0.5,0.67")
    args = parser.parse_args()

    ring = build_ring(args.records)
    print("loss_prob,mean_bulk_losses,mean_retransmissions,mean_duration_s,complete")
    for loss in (float(v) for v in args.losses.split(",")):
        link = LinkModel(loss_prob=loss)
        bulk, retr, dur, complete = 0, 0, 0.0, 0
        for seed in range(args.seeds):
            mote = MoteState(mote_id="m", boot_utc_s=0, sensors={}, flash=ring)
            records, stats = run_download(mote, 0, link, random.Random(f"{loss}:{seed}"))
            bulk += stats.bulk_losses
            retr += stats.retransmission_requests
            dur += stats.duration_s
            complete += len(records) == args.records
        n = args.seeds
        print(f"{loss:g},{bulk / n:.1f},{retr / n:.1f},{dur / n:.2f},{complete}/{n}")


if __name__ == "__main__":
    main()
