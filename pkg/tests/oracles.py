"""Independent reference implementations used only to check the package.

Everything here is deliberately written along a different path from the
code under test: bit-at-a-time CRC instead of table-driven, dict-based
field packing instead of shift chains, plain queues instead of cycle
models.
"""

import zlib


# -- CRC-32: bit-serial, MSB-first with explicit reflection -------------------

def crc32_bitwise(data: bytes, init=0xFFFFFFFF, xor_out=0xFFFFFFFF) -> int:
    def reflect(v, n):
        r = 0
        for i in range(n):
            if v & (1 << i):
                r |= 1 << (n - 1 - i)
        return r

    crc = reflect(init, 32)
    for byte in data:
        crc ^= reflect(byte, 8) << 24
        for _ in range(8):
            if crc & 0x80000000:
                crc = ((crc << 1) ^ 0x04C11DB7) & 0xFFFFFFFF
            else:
                crc = (crc << 1) & 0xFFFFFFFF
    return reflect(crc, 32) ^ xor_out


def crc32_zlib(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


# -- TLP header packing via named bit fields ----------------------------------

def pack_fields(width, fields):
    """fields: list of (msb, lsb, value); returns the packed word."""
    word = 0
    for msb, lsb, value in fields:
        span = msb - lsb + 1
        assert 0 <= value < (1 << span), (msb, lsb, value)
        word |= value << lsb
    assert word < (1 << width)
    return word


def oracle_encode(kind, *, length_dw=1, traffic_class=0, digest=False,
                  requester_id=0, tag=0, first_be=0xF, last_be=0x0,
                  address=0, completer_id=0, cpl_status=0, byte_count=0,
                  lower_address=0, payload=()):
    """Field-by-field header assembly for the six modeled kinds."""
    fmt_type = {
        "MemWrite32": (0b010, 0b00000), "MemWrite64": (0b011, 0b00000),
        "MemRead32": (0b000, 0b00000), "MemRead64": (0b001, 0b00000),
        "CplD": (0b010, 0b01010), "Cpl": (0b000, 0b01010),
    }[kind]
    dw0 = pack_fields(32, [
        (31, 29, fmt_type[0]),
        (28, 24, fmt_type[1]),
        (22, 20, traffic_class),
        (15, 15, 1 if digest else 0),
        (9, 0, length_dw % 1024),
    ])
    if kind in ("CplD", "Cpl"):
        dw1 = pack_fields(32, [(31, 16, completer_id), (15, 13, cpl_status),
                               (11, 0, byte_count)])
        dw2 = pack_fields(32, [(31, 16, requester_id), (15, 8, tag),
                               (6, 0, lower_address)])
        dws = [dw0, dw1, dw2]
    else:
        dw1 = pack_fields(32, [(31, 16, requester_id), (15, 8, tag),
                               (7, 4, last_be), (3, 0, first_be)])
        if kind in ("MemWrite64", "MemRead64"):
            dws = [dw0, dw1, address >> 32, address & 0xFFFFFFFC]
        else:
            dws = [dw0, dw1, address & 0xFFFFFFFC]
    dws += list(payload)
    if digest:
        body = b"".join(d.to_bytes(4, "big") for d in dws)
        dws.append(crc32_zlib(body))
    return dws


# -- route table matching: direct transliteration of the matching rule --------

def oracle_route(kind_name, address, entries, default):
    """entries: list of dicts {lo, hi, kinds (set of names), fifo}.
    Returns ('fifo', index) | ('discard', None) | ('special', index)."""
    for entry in entries:
        if kind_name not in entry["kinds"]:
            continue
        if kind_name in ("CplD", "Cpl"):
            return ("fifo", entry["fifo"])
        if entry["lo"] <= address <= entry["hi"]:
            return ("fifo", entry["fifo"])
    return default


# -- scheduler: packet-level arbiter replay ------------------------------------

def oracle_arbiter(policy, priority, arrivals, horizon):
    """Replay grant decisions at packet granularity.

    arrivals: list of (edge, fifo_index, packet_words) — the edge at which the
    packet became fully resident (visible to judging from edge+1).  Returns
    the list of (grant_edge, fifo_index).  Non-preemptive; a grant at edge e
    for a W-word packet occupies edges e..e+W-1.
    """
    nfifos = len(priority)
    queues = [[] for _ in range(nfifos)]
    pending = sorted(arrivals)
    grants = []
    busy_until = 0  # first edge at which a new grant may be issued
    last_rr = nfifos - 1
    ai = 0
    for edge in range(horizon):
        while ai < len(pending) and pending[ai][0] <= edge - 1:
            _, fifo, words = pending[ai]
            queues[fifo].append(words)
            ai += 1
        if edge < busy_until:
            continue
        eligible = [i for i in range(nfifos) if queues[i]]
        if not eligible:
            continue
        if policy == "strict":
            ranked = [i for i in priority if i in eligible]
            chosen = ranked[0]
        else:
            order = [(last_rr + 1 + k) % nfifos for k in range(nfifos)]
            chosen = next(i for i in order if i in eligible)
            last_rr = chosen
        words = queues[chosen].pop(0)
        grants.append((edge, chosen))
        busy_until = edge + words
    return grants


# -- value change dump reader ---------------------------------------------------

def parse_vcd(text):
    """Minimal VCD reader: returns (timescale, vars, changes).

    vars: dict id_code -> (name, width); changes: list of (time, id_code,
    value_string) in file order.
    """
    tokens = text.split("\n")
    timescale = None
    vars_ = {}
    changes = []
    now = None
    in_defs = True
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        i += 1
        if not line:
            continue
        if in_defs:
            if line.startswith("$timescale"):
                parts = line.split()
                timescale = parts[1] if len(parts) > 2 else tokens[i].strip()
            elif line.startswith("$var"):
                _, _, width, code, name = line.split()[:5]
                vars_[code] = (name, int(width))
            elif line.startswith("$enddefinitions"):
                in_defs = False
            continue
        if line.startswith("#"):
            now = int(line[1:])
        elif line.startswith("$"):
            continue  # $dumpvars / $end
        elif line.startswith("b"):
            value, code = line[1:].split()
            changes.append((now, code, value))
        else:
            changes.append((now, line[1:], line[0]))
    return timescale, vars_, changes
