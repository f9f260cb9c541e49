"""Transaction layer packet codec and 64-bit framing.

Covers the TLP subset the datapath moves around: 32/64-bit memory writes and
reads plus completions, encoded to/from 32-bit DW sequences following the
usual PCIe header layout (fmt/type in DW0, requester/tag in DW1, address or
completion status after that).  Unknown fmt/type pairs round-trip as ``Raw``
so routing and forwarding still work for traffic the model does not parse.

The framing half packs DW sequences two-per-64-bit-word with start/end
marker bits and a tail-validity flag, and recovers packet spans from a
(possibly corrupted) word stream, confining damage to the packets actually
hit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import DigestMismatch, InvalidTlp, MalformedHeader, Truncated

MASK32 = 0xFFFF_FFFF


class TlpKind(enum.Enum):
    MEM_WRITE32 = "MemWrite32"
    MEM_WRITE64 = "MemWrite64"
    MEM_READ32 = "MemRead32"
    MEM_READ64 = "MemRead64"
    CPLD = "CplD"
    CPL = "Cpl"
    RAW = "Raw"


# fmt occupies DW0[31:29], type DW0[28:24].
_FMT_TYPE = {
    TlpKind.MEM_WRITE32: (0b010, 0b00000),
    TlpKind.MEM_WRITE64: (0b011, 0b00000),
    TlpKind.MEM_READ32: (0b000, 0b00000),
    TlpKind.MEM_READ64: (0b001, 0b00000),
    TlpKind.CPLD: (0b010, 0b01010),
    TlpKind.CPL: (0b000, 0b01010),
}
_KIND_BY_FMT_TYPE = {v: k for k, v in _FMT_TYPE.items()}

_WITH_PAYLOAD = {TlpKind.MEM_WRITE32, TlpKind.MEM_WRITE64, TlpKind.CPLD}
_COMPLETIONS = {TlpKind.CPLD, TlpKind.CPL}
_FOUR_DW_HEADER = {TlpKind.MEM_WRITE64, TlpKind.MEM_READ64}


@dataclass
class Tlp:
    """One decoded transaction layer packet.

    Requests carry ``address``; completions carry ``completer_id`` /
    ``cpl_status`` / ``byte_count`` / ``lower_address`` instead.  ``payload``
    holds 32-bit DWs and must agree with ``length_dw`` for payload-bearing
    kinds.  ``Raw`` packets keep every DW verbatim in ``payload``.
    """

    kind: TlpKind
    traffic_class: int = 0
    length_dw: int = 1
    requester_id: int = 0
    tag: int = 0
    first_be: int = 0xF
    last_be: int = 0x0
    address: int = 0
    completer_id: int = 0
    cpl_status: int = 0
    byte_count: int = 0
    lower_address: int = 0
    payload: tuple = ()
    digest: bool = False

    def __post_init__(self):
        self.payload = tuple(dw & MASK32 for dw in self.payload)

    # -- constructors ------------------------------------------------------

    @classmethod
    def mem_write32(cls, address, payload, requester_id=0, tag=0,
                    first_be=0xF, last_be=0x0, traffic_class=0, digest=False):
        payload = tuple(payload)
        return cls(TlpKind.MEM_WRITE32, traffic_class=traffic_class,
                   length_dw=len(payload), requester_id=requester_id, tag=tag,
                   first_be=first_be, last_be=last_be, address=address,
                   payload=payload, digest=digest)

    @classmethod
    def mem_read32(cls, address, length_dw, requester_id=0, tag=0,
                   first_be=0xF, last_be=0x0, traffic_class=0, digest=False):
        return cls(TlpKind.MEM_READ32, traffic_class=traffic_class,
                   length_dw=length_dw, requester_id=requester_id, tag=tag,
                   first_be=first_be, last_be=last_be, address=address,
                   digest=digest)

    @classmethod
    def mem_write64(cls, address, payload, requester_id=0, tag=0,
                    first_be=0xF, last_be=0x0, traffic_class=0, digest=False):
        payload = tuple(payload)
        return cls(TlpKind.MEM_WRITE64, traffic_class=traffic_class,
                   length_dw=len(payload), requester_id=requester_id, tag=tag,
                   first_be=first_be, last_be=last_be, address=address,
                   payload=payload, digest=digest)

    @classmethod
    def mem_read64(cls, address, length_dw, requester_id=0, tag=0,
                   first_be=0xF, last_be=0x0, traffic_class=0, digest=False):
        return cls(TlpKind.MEM_READ64, traffic_class=traffic_class,
                   length_dw=length_dw, requester_id=requester_id, tag=tag,
                   first_be=first_be, last_be=last_be, address=address,
                   digest=digest)

    @classmethod
    def cpl_with_data(cls, completer_id, byte_count, requester_id, tag,
                      payload, cpl_status=0, lower_address=0, traffic_class=0,
                      digest=False):
        payload = tuple(payload)
        return cls(TlpKind.CPLD, traffic_class=traffic_class,
                   length_dw=len(payload), requester_id=requester_id, tag=tag,
                   first_be=0, last_be=0, completer_id=completer_id,
                   cpl_status=cpl_status, byte_count=byte_count,
                   lower_address=lower_address, payload=payload, digest=digest)

    @classmethod
    def raw(cls, dws):
        dws = tuple(dws)
        return cls(TlpKind.RAW, length_dw=max(len(dws), 1), payload=dws)

    # -- structure ---------------------------------------------------------

    @property
    def header_dw(self):
        if self.kind is TlpKind.RAW:
            return 0
        return 4 if self.kind in _FOUR_DW_HEADER else 3

    @property
    def payload_dw(self):
        return len(self.payload)

    def validate(self):
        """Raise InvalidTlp unless every field invariant holds."""
        if self.kind is TlpKind.RAW:
            if not self.payload:
                raise InvalidTlp("Raw TLP must carry at least one DW")
            return
        if not 0 <= self.traffic_class <= 7:
            raise InvalidTlp("traffic_class out of range: %d" % self.traffic_class)
        if not 1 <= self.length_dw <= 1024:
            raise InvalidTlp("length_dw out of range: %d" % self.length_dw)
        if not 0 <= self.requester_id <= 0xFFFF:
            raise InvalidTlp("requester_id out of range")
        if not 0 <= self.tag <= 0xFF:
            raise InvalidTlp("tag out of range")
        if not (0 <= self.first_be <= 0xF and 0 <= self.last_be <= 0xF):
            raise InvalidTlp("byte enables out of range")
        if self.kind in _WITH_PAYLOAD:
            if len(self.payload) != self.length_dw:
                raise InvalidTlp("payload is %d DW but length_dw says %d"
                                 % (len(self.payload), self.length_dw))
        elif self.payload:
            raise InvalidTlp("%s must not carry payload" % self.kind.value)
        if self.kind in _COMPLETIONS:
            if not 0 <= self.completer_id <= 0xFFFF:
                raise InvalidTlp("completer_id out of range")
            if not 0 <= self.cpl_status <= 7:
                raise InvalidTlp("cpl_status out of range")
            if not 0 <= self.byte_count <= 0xFFF:
                raise InvalidTlp("byte_count out of range")
            if not 0 <= self.lower_address <= 0x7F:
                raise InvalidTlp("lower_address out of range")
        else:
            if self.address & 0x3:
                raise InvalidTlp("address 0x%X not DW aligned" % self.address)
            if not 0 <= self.address < (1 << 64):
                raise InvalidTlp("address out of range")
            if self.kind not in _FOUR_DW_HEADER and self.address >= (1 << 32):
                raise InvalidTlp("32-bit kind %s with 64-bit address 0x%X"
                                 % (self.kind.value, self.address))


def total_length_dw(tlp: Tlp) -> int:
    """Complete on-interface size of a TLP in DWs: header + payload + digest."""
    if tlp.kind is TlpKind.RAW:
        return len(tlp.payload)
    return tlp.header_dw + tlp.payload_dw + (1 if tlp.digest else 0)


# -- CRC ---------------------------------------------------------------------

CRC32_POLY = 0x04C11DB7

def _reflect(value, width):
    out = 0
    for _ in range(width):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out

def _make_table():
    # reflected (LSB-first) table for the IEEE polynomial
    poly = _reflect(CRC32_POLY, 32)
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = (crc >> 1) ^ poly if crc & 1 else crc >> 1
        table.append(crc)
    return table

_CRC_TABLE = _make_table()


def crc32(data: bytes, init: int = 0xFFFF_FFFF, xor_out: int = 0xFFFF_FFFF) -> int:
    """Table-driven CRC-32 (IEEE polynomial, reflected in/out).

    With the default init/xor-out this matches the common check value
    crc32(b"123456789") == 0xCBF43926.  init/xor_out are exposed so the
    XOR-linearity of the bare register can be exercised directly.
    """
    crc = init
    table = _CRC_TABLE
    for byte in data:
        crc = (crc >> 8) ^ table[(crc ^ byte) & 0xFF]
    return crc ^ xor_out


def _dws_to_bytes(dws):
    out = bytearray()
    for dw in dws:
        out += dw.to_bytes(4, "big")
    return bytes(out)


def packet_digest(dws) -> int:
    """Digest DW appended to a packet: CRC-32 over the DWs in wire byte order."""
    return crc32(_dws_to_bytes(dws))


# -- encode / decode ----------------------------------------------------------

def encode_tlp(tlp: Tlp) -> list:
    """Encode a TLP to its DW sequence (header, payload, optional digest)."""
    tlp.validate()
    if tlp.kind is TlpKind.RAW:
        return list(tlp.payload)

    fmt, typ = _FMT_TYPE[tlp.kind]
    dw0 = (fmt << 29) | (typ << 24) | (tlp.traffic_class << 20) \
        | ((1 << 15) if tlp.digest else 0) | (tlp.length_dw & 0x3FF)
    if tlp.kind in _COMPLETIONS:
        dw1 = (tlp.completer_id << 16) | (tlp.cpl_status << 13) | tlp.byte_count
        dw2 = (tlp.requester_id << 16) | (tlp.tag << 8) | tlp.lower_address
        dws = [dw0, dw1, dw2]
    else:
        dw1 = (tlp.requester_id << 16) | (tlp.tag << 8) \
            | (tlp.last_be << 4) | tlp.first_be
        if tlp.kind in _FOUR_DW_HEADER:
            dws = [dw0, dw1, (tlp.address >> 32) & MASK32, tlp.address & MASK32 & ~0x3]
        else:
            dws = [dw0, dw1, tlp.address & MASK32 & ~0x3]
    dws.extend(tlp.payload)
    if tlp.digest:
        dws.append(packet_digest(dws))
    return dws


@dataclass(frozen=True)
class HeaderProbe:
    """What DW0 alone reveals: kind, section sizes, expected total DWs."""
    kind: TlpKind
    header_dw: int
    payload_dw: int
    digest: bool
    total_dw: int


def probe_dw0(dw0: int) -> HeaderProbe:
    """Classify a first DW and derive the packet's expected total length.

    Raises MalformedHeader for reserved fmt encodings (fmt >= 0b100); unknown
    fmt/type pairs come back as RAW with zero total (length unknowable).
    """
    fmt = (dw0 >> 29) & 0x7
    typ = (dw0 >> 24) & 0x1F
    if fmt >= 0b100:
        raise MalformedHeader("reserved fmt 0b%s in DW0 0x%08X" % (bin(fmt)[2:], dw0))
    kind = _KIND_BY_FMT_TYPE.get((fmt, typ))
    if kind is None:
        return HeaderProbe(TlpKind.RAW, 0, 0, False, 0)
    header_dw = 4 if fmt & 0b001 else 3
    length = dw0 & 0x3FF or 1024
    payload_dw = length if fmt & 0b010 else 0
    digest = bool(dw0 & (1 << 15))
    total = header_dw + payload_dw + (1 if digest else 0)
    return HeaderProbe(kind, header_dw, payload_dw, digest, total)


def decode_tlp(dws) -> Tlp:
    """Decode a DW sequence back into a Tlp.  Inverse of encode_tlp.

    The sequence must contain exactly the DWs the header implies; fewer or
    extra raise Truncated.  When the digest bit is set the trailing CRC DW is
    verified (DigestMismatch on failure).  Unknown fmt/type pairs decode to
    RAW, preserving every DW.
    """
    dws = [dw & MASK32 for dw in dws]
    if len(dws) < 3:
        raise Truncated("need at least 3 DWs, got %d" % len(dws))
    probe = probe_dw0(dws[0])
    if probe.kind is TlpKind.RAW:
        return Tlp.raw(dws)
    if len(dws) != probe.total_dw:
        raise Truncated("header implies %d DWs, got %d" % (probe.total_dw, len(dws)))
    if probe.digest:
        body, trailer = dws[:-1], dws[-1]
        expect = packet_digest(body)
        if trailer != expect:
            raise DigestMismatch("digest 0x%08X != computed 0x%08X" % (trailer, expect))
    else:
        body = dws

    dw0 = dws[0]
    traffic_class = (dw0 >> 20) & 0x7
    length = dw0 & 0x3FF or 1024
    payload = tuple(body[probe.header_dw:])
    kind = probe.kind
    if kind in _COMPLETIONS:
        dw1, dw2 = dws[1], dws[2]
        return Tlp(kind, traffic_class=traffic_class, length_dw=length,
                   requester_id=(dw2 >> 16) & 0xFFFF, tag=(dw2 >> 8) & 0xFF,
                   first_be=0, last_be=0,
                   completer_id=(dw1 >> 16) & 0xFFFF,
                   cpl_status=(dw1 >> 13) & 0x7, byte_count=dw1 & 0xFFF,
                   lower_address=dw2 & 0x7F, payload=payload,
                   digest=probe.digest)
    dw1 = dws[1]
    if kind in _FOUR_DW_HEADER:
        address = (dws[2] << 32) | (dws[3] & ~0x3)
    else:
        address = dws[2] & ~0x3
    return Tlp(kind, traffic_class=traffic_class, length_dw=length,
               requester_id=(dw1 >> 16) & 0xFFFF, tag=(dw1 >> 8) & 0xFF,
               first_be=dw1 & 0xF, last_be=(dw1 >> 4) & 0xF,
               address=address, payload=payload, digest=probe.digest)


def route_fields(dws):
    """(kind, address-or-None, total_dw) from up to the first 4 DWs.

    This is the routing view after the two leading quad-words have been
    captured: enough header to pick a destination without waiting for the
    rest of the packet.  Short or unknown headers classify as RAW with
    address None and total 0.
    """
    try:
        probe = probe_dw0(dws[0]) if dws else None
    except MalformedHeader:
        probe = None
    if probe is None or probe.kind is TlpKind.RAW or len(dws) < 3:
        return TlpKind.RAW, None, 0
    kind = probe.kind
    if kind in _COMPLETIONS:
        return kind, None, probe.total_dw
    if kind in _FOUR_DW_HEADER:
        if len(dws) < 4:
            return TlpKind.RAW, None, 0
        return kind, (dws[2] << 32) | (dws[3] & ~0x3), probe.total_dw
    return kind, dws[2] & ~0x3, probe.total_dw


# -- framing -------------------------------------------------------------------

class FramedWord:
    """One datapath beat: packed DWs plus packet marker bits.

    ``data`` holds the DWs low-DW-first.  ``valid_dws`` tells how many DWs
    carry packet bytes; it may fall short of the port width only on an eof
    beat.  ``high_dw_valid`` is the 64-bit view of that count (false iff a
    64-bit eof beat carries a single DW).
    """

    __slots__ = ("data", "sof", "eof", "valid_dws")

    def __init__(self, data, sof=False, eof=False, valid_dws=2):
        self.data = data
        self.sof = sof
        self.eof = eof
        self.valid_dws = valid_dws

    @property
    def high_dw_valid(self):
        return self.valid_dws >= 2

    def dws(self):
        return [(self.data >> (32 * i)) & MASK32 for i in range(self.valid_dws)]

    def __eq__(self, other):
        return (isinstance(other, FramedWord)
                and self.data == other.data and self.sof == other.sof
                and self.eof == other.eof and self.valid_dws == other.valid_dws)

    def __repr__(self):
        marks = "".join(m for m, on in (("S", self.sof), ("E", self.eof)) if on)
        return "FramedWord(0x%016X,%s,%ddw)" % (self.data, marks or "-", self.valid_dws)


def frame(dws) -> list:
    """Pack a DW sequence into 64-bit framed words, low DW first.

    The first word carries sof, the last eof; an odd DW count leaves the
    final word's upper half invalid.
    """
    if not dws:
        raise ValueError("cannot frame an empty packet")
    words = []
    n = len(dws)
    for i in range(0, n, 2):
        if i + 1 < n:
            words.append(FramedWord(dws[i] | (dws[i + 1] << 32), valid_dws=2))
        else:
            words.append(FramedWord(dws[i], valid_dws=1))
    words[0].sof = True
    words[-1].eof = True
    return words


@dataclass
class DeframeDiagnostics:
    corrupted: int = 0
    resync_discards: int = 0
    corrupted_indices: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.corrupted or self.resync_discards)


def _span_ok(dws):
    try:
        probe = probe_dw0(dws[0])
        if probe.kind is TlpKind.RAW:
            return True  # unmodeled traffic passes through unchecked
        if probe.total_dw != len(dws):
            return False
        if probe.digest and dws[-1] != packet_digest(dws[:-1]):
            return False
    except MalformedHeader:
        return False
    return True


def deframe(stream) -> tuple:
    """Recover packets from a framed word stream.

    Packets are the maximal sof..eof spans.  Words outside any span count as
    resync discards; a span whose decoded length disagrees with its DW count
    or whose digest fails is dropped and counted corrupted, and scanning
    resumes at the next sof.  Later packets are never affected by earlier
    damage.
    """
    packets = []
    diags = DeframeDiagnostics()
    open_dws = None
    span_index = 0
    for word in stream:
        if word.sof:
            if open_dws is not None:
                # previous packet never saw its eof: flag it and resync here
                diags.corrupted += 1
                diags.corrupted_indices.append(span_index)
                span_index += 1
            open_dws = []
        elif open_dws is None:
            diags.resync_discards += 1
            continue
        open_dws.extend(word.dws())
        if word.eof:
            if _span_ok(open_dws):
                packets.append(open_dws)
            else:
                diags.corrupted += 1
                diags.corrupted_indices.append(span_index)
            span_index += 1
            open_dws = None
    if open_dws is not None:
        diags.corrupted += 1
        diags.corrupted_indices.append(span_index)
    return packets, diags
