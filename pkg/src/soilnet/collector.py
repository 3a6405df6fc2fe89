"""Gateway side: beacon health tracking, the bulk + send-and-wait download
protocol over a lossy link, and Level-0 CSV export."""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

from .channel import DELIVERED, LinkModel, transmit
from .config import iso_utc
from .energy import RADIO_ON_CURRENT_MA
from .motesim import FLASH_CAPACITY_RECORDS, MoteState, SampleRecord, StatusMessage, mark_downloaded

LEVEL0_HEADER = ("download_id,mote_id,epoch,seq,mote_time_s,soil_temp_adc,soil_moist_adc,"
                 "box_temp_adc,photo_adc,battery_adc,anchor_mote_time_s,anchor_utc_iso8601")

LQI_WINDOW = 32


@dataclass
class MoteHealth:
    mote_id: str
    last_seen_utc_s: float = 0.0
    last_battery_adc: int = 0
    stored_records: int = 0
    buffer_full: bool = False
    beacons_received: int = 0
    lqi_history: deque = field(default_factory=lambda: deque(maxlen=LQI_WINDOW))


@dataclass(frozen=True)
class DownloadPolicy:
    max_retries_per_packet: int = 100
    status_timeout_s: float = 600.0
    packet_time_s: float = 0.02  # simulated airtime per packet exchange


@dataclass
class DownloadStats:
    packets_expected: int = 0
    packets_received_bulk: int = 0
    bulk_losses: int = 0
    retransmission_requests: int = 0
    max_retries_for_one_packet: int = 0
    duration_s: float = 0.0


class DownloadError(Exception):
    pass


class MoteUnreachableError(DownloadError):
    """No status beacon inside the policy timeout."""


class DataEvictedError(DownloadError):
    """Requested data was overwritten in the ring; permanent loss."""

    def __init__(self, lost_count: int):
        self.lost_count = lost_count
        super().__init__(f"{lost_count} records permanently lost to ring overwrite")


class DownloadAbortedError(DownloadError):
    """A hole exceeded the retry budget; partial data retained for retry."""

    def __init__(self, records, stats: DownloadStats):
        self.records = records
        self.stats = stats
        super().__init__(f"aborted with {len(records)} of {stats.packets_expected} records")


def handle_status(health_table: dict[str, MoteHealth], msg: StatusMessage, lqi: float,
                  now_utc_s: float = 0.0) -> MoteHealth:
    """Fold one received beacon into the health table."""
    health = health_table.get(msg.mote_id)
    if health is None:
        health = MoteHealth(mote_id=msg.mote_id)
        health_table[msg.mote_id] = health
    health.last_seen_utc_s = max(health.last_seen_utc_s, now_utc_s)
    health.last_battery_adc = msg.battery_adc
    health.stored_records = msg.stored_records
    health.buffer_full = msg.stored_records >= FLASH_CAPACITY_RECORDS
    health.beacons_received += 1
    if lqi is not None:
        health.lqi_history.append(lqi)
    return health


def run_download(mote: MoteState, since_seq: int, link: LinkModel, rng,
                 policy: DownloadPolicy = DownloadPolicy(),
                 last_status_utc_s: float | None = None,
                 now_utc_s: float | None = None):
    """Bulk-stream records since `since_seq`, then recover holes one at a
    time with send-and-wait NACKs. Returns (records, stats); the record list
    is gap-free, duplicate-free, and sequence-ordered on success."""
    if last_status_utc_s is not None and now_utc_s is not None:
        if now_utc_s - last_status_utc_s > policy.status_timeout_s:
            raise MoteUnreachableError(
                f"no status from {mote.mote_id} in {now_utc_s - last_status_utc_s:.0f} s")
    flash = mote.flash
    if since_seq < flash.tail_seq:
        raise DataEvictedError(flash.tail_seq - since_seq)
    high_seq = flash.head_seq - 1  # snapshot at the bulk request
    stats = DownloadStats()
    if high_seq < since_seq:
        return [], stats

    to_send = flash.read_range(since_seq, high_seq + 1)
    stats.packets_expected = len(to_send)
    received: dict[int, SampleRecord] = {}
    holes: list[int] = []
    for record in to_send:
        delivery = transmit(link, rng, record)
        if delivery.outcome == DELIVERED:
            if record.seq not in received:  # dedupe on duplicated deliveries
                received[record.seq] = record
        else:
            holes.append(record.seq)
    stats.packets_received_bulk = len(received)
    stats.bulk_losses = stats.packets_expected - stats.packets_received_bulk
    transmit(link, rng, None)  # mote's concluding status marks end of bulk

    base = since_seq
    for seq in holes:
        record = flash.read_range(seq, seq + 1)[0]
        attempts = 0
        while True:
            attempts += 1
            stats.retransmission_requests += 1
            if attempts > policy.max_retries_per_packet:
                stats.max_retries_for_one_packet = max(stats.max_retries_for_one_packet, attempts - 1)
                _finish_stats(stats, policy)
                _charge_download(mote, stats)
                partial = [received[s] for s in sorted(received)]
                raise DownloadAbortedError(partial, stats)
            delivery = transmit(link, rng, record)
            if delivery.outcome == DELIVERED:
                received[seq] = record
                break
        stats.max_retries_for_one_packet = max(stats.max_retries_for_one_packet, attempts)

    records = [received[s] for s in range(base, high_seq + 1)]
    _finish_stats(stats, policy)
    _charge_download(mote, stats)
    mark_downloaded(mote, high_seq)
    return records, stats


def _finish_stats(stats: DownloadStats, policy: DownloadPolicy) -> None:
    exchanges = stats.packets_expected + stats.retransmission_requests + 2  # request + final status
    stats.duration_s = exchanges * policy.packet_time_s


def _charge_download(mote: MoteState, stats: DownloadStats) -> None:
    # ledgered separately; the closed-form budget deliberately excludes it
    mote.charge("download", RADIO_ON_CURRENT_MA, stats.duration_s)


def export_level0(records, mote_id: str, download_id: str, time_anchor, path,
                  epoch: int = 0) -> None:
    """Write the Level-0 CSV (UTF-8, LF). Byte-identical for identical input."""
    if not records:
        raise ValueError("refusing to export an empty record set")
    anchor_mote_time_s, anchor_utc_s = time_anchor
    anchor_iso = anchor_utc_s if isinstance(anchor_utc_s, str) else iso_utc(anchor_utc_s)
    last = None
    for record in records:
        if last is not None and record.seq <= last:
            raise ValueError("records must be strictly sequence-ordered")
        last = record.seq
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LEVEL0_HEADER + "\n")
        for r in records:
            fh.write(f"{download_id},{mote_id},{epoch},{r.seq},{r.mote_time_s},"
                     f"{r.readings[0]},{r.readings[1]},{r.readings[2]},{r.readings[3]},"
                     f"{r.readings[4]},{anchor_mote_time_s},{anchor_iso}\n")


def read_level0(path):
    """Parse a Level-0 CSV into dict rows; raises on a wrong column set."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = LEVEL0_HEADER.split(",")
        if reader.fieldnames != expected:
            raise ValueError(f"not a Level-0 file: columns {reader.fieldnames}")
        return list(reader)
