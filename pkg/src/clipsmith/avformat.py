"""Minimal RIFF/AVI muxer and demuxer (MJPEG video + PCM s16le audio).

Backs the bundled reference transcoder so the pipeline can run real
encode/cut/concat work on hosts without an ffmpeg install. AVI was chosen
because it is in the supported container set, trivially seekable (every
MJPEG frame is a keyframe), and simple enough to mux correctly in pure
Python.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator, Optional

AVIF_HASINDEX = 0x00000010
AVIF_ISINTERLEAVED = 0x00000100
AVIIF_KEYFRAME = 0x00000010

VIDEO_CHUNK = b"00dc"
AUDIO_CHUNK = b"01wb"


class AviFormatError(Exception):
    pass


@dataclass
class StreamInfo:
    width: int = 0
    height: int = 0
    fps: float = 0.0
    n_frames: int = 0
    sample_rate: int = 0
    channels: int = 0
    n_samples: int = 0


@dataclass
class AviInfo:
    path: str
    has_video: bool = False
    has_audio: bool = False
    video: StreamInfo = field(default_factory=StreamInfo)
    audio: StreamInfo = field(default_factory=StreamInfo)
    tags: dict[str, str] = field(default_factory=dict)
    movi_offset: int = 0

    @property
    def video_duration(self) -> float:
        if not self.has_video or self.video.fps <= 0:
            return 0.0
        return self.video.n_frames / self.video.fps

    @property
    def audio_duration(self) -> float:
        if not self.has_audio or self.audio.sample_rate <= 0:
            return 0.0
        return self.audio.n_samples / self.audio.sample_rate

    @property
    def duration(self) -> float:
        return max(self.video_duration, self.audio_duration)


def _chunk(fourcc: bytes, payload: bytes) -> bytes:
    data = struct.pack("<4sI", fourcc, len(payload)) + payload
    if len(payload) % 2:
        data += b"\x00"
    return data


def _list_chunk(list_type: bytes, payload: bytes) -> bytes:
    return _chunk(b"LIST", list_type + payload)


class AviWriter:
    """Streaming AVI writer; headers are patched on close."""

    def __init__(
        self,
        path: str | Path,
        width: int,
        height: int,
        fps: float,
        sample_rate: Optional[int] = None,
        channels: int = 1,
        tags: Optional[dict[str, str]] = None,
    ):
        if width <= 0 or height <= 0 or fps <= 0:
            raise AviFormatError(f"bad video parameters {width}x{height}@{fps}")
        self.path = Path(path)
        self.width = width
        self.height = height
        self.fps = float(fps)
        self.sample_rate = sample_rate
        self.channels = channels
        self.tags = dict(tags or {})
        self._frames = 0
        self._audio_bytes = 0
        self._index: list[tuple[bytes, int, int]] = []
        self._fh: BinaryIO = open(self.path, "wb")
        self._write_headers()

    # header layout bookkeeping: offsets of fields patched on close
    def _write_headers(self) -> None:
        fh = self._fh
        fh.write(struct.pack("<4sI4s", b"RIFF", 0, b"AVI "))

        fps_num = round(self.fps * 1000)
        fps_den = 1000
        avih = struct.pack(
            "<IIIIIIIIIIIIII",
            round(1_000_000 * fps_den / fps_num),  # dwMicroSecPerFrame
            0,
            0,
            AVIF_HASINDEX | AVIF_ISINTERLEAVED,
            0,  # dwTotalFrames, patched
            0,
            2 if self.sample_rate else 1,
            0,
            self.width,
            self.height,
            0, 0, 0, 0,
        )

        vids_strh = struct.pack(
            "<4s4sIHHIIIIIIiIHHHH",
            b"vids", b"MJPG", 0, 0, 0, 0,
            fps_den, fps_num,
            0,
            0,  # dwLength, patched
            0, -1, 0,
            0, 0, self.width, self.height,
        )
        vids_strf = struct.pack(
            "<IiiHH4sIiiII",
            40, self.width, self.height, 1, 24,
            b"MJPG", self.width * self.height * 3, 0, 0, 0, 0,
        )
        strl_video = _list_chunk(b"strl", _chunk(b"strh", vids_strh) + _chunk(b"strf", vids_strf))

        strl_audio = b""
        if self.sample_rate:
            block_align = 2 * self.channels
            auds_strh = struct.pack(
                "<4s4sIHHIIIIIIiIHHHH",
                b"auds", b"\x00\x00\x00\x00", 0, 0, 0, 0,
                1, self.sample_rate,
                0,
                0,  # dwLength (samples), patched
                0, -1, block_align,
                0, 0, 0, 0,
            )
            auds_strf = struct.pack(
                "<HHIIHH",
                1, self.channels, self.sample_rate,
                self.sample_rate * block_align, block_align, 16,
            )
            strl_audio = _list_chunk(b"strl", _chunk(b"strh", auds_strh) + _chunk(b"strf", auds_strf))

        hdrl = _list_chunk(b"hdrl", _chunk(b"avih", avih) + strl_video + strl_audio)
        fh.write(hdrl)

        # dwTotalFrames sits 16+4+8+12+16 bytes into the file:
        # RIFF(12) + LIST hdr(12) + avih hdr(8) + 4 dwords
        self._total_frames_off = 12 + 12 + 8 + 16
        # vids dwLength: RIFF(12)+LIST hdr(12)+avih chunk(8+56)+strl LIST hdr(12)+strh hdr(8)+offset in strh
        strh_len_off = 4 + 4 + 4 + 2 + 2 + 4 + 4 + 4 + 4  # fccType..dwStart
        self._video_len_off = 12 + 12 + 8 + 56 + 12 + 8 + strh_len_off
        self._audio_len_off = None
        if self.sample_rate:
            vids_strl_size = 12 + (8 + 56) + (8 + 40)
            self._audio_len_off = 12 + 12 + 8 + 56 + vids_strl_size + 12 + 8 + strh_len_off

        if self.tags:
            info_payload = b""
            for key, value in sorted(self.tags.items()):
                fourcc = key.encode("ascii")[:4].ljust(4, b" ")
                info_payload += _chunk(fourcc, value.encode("utf-8") + b"\x00")
            fh.write(_list_chunk(b"INFO", info_payload))

        self._movi_list_off = fh.tell()
        fh.write(struct.pack("<4sI4s", b"LIST", 0, b"movi"))
        self._movi_start = fh.tell() - 4  # offset of the 'movi' fourcc

    def add_frame(self, jpeg: bytes) -> None:
        self._index.append((VIDEO_CHUNK, self._fh.tell() - self._movi_start, len(jpeg)))
        self._fh.write(_chunk(VIDEO_CHUNK, jpeg))
        self._frames += 1

    def add_audio(self, pcm: bytes) -> None:
        if not self.sample_rate:
            raise AviFormatError("writer has no audio stream")
        if len(pcm) % (2 * self.channels):
            raise AviFormatError("pcm payload not block aligned")
        self._index.append((AUDIO_CHUNK, self._fh.tell() - self._movi_start, len(pcm)))
        self._fh.write(_chunk(AUDIO_CHUNK, pcm))
        self._audio_bytes += len(pcm)

    def close(self) -> None:
        fh = self._fh
        movi_end = fh.tell()

        idx = b"".join(
            struct.pack("<4sIII", fourcc, AVIIF_KEYFRAME, offset, size)
            for fourcc, offset, size in self._index
        )
        fh.write(_chunk(b"idx1", idx))
        riff_end = fh.tell()

        fh.seek(4)
        fh.write(struct.pack("<I", riff_end - 8))
        fh.seek(self._total_frames_off)
        fh.write(struct.pack("<I", self._frames))
        fh.seek(self._video_len_off)
        fh.write(struct.pack("<I", self._frames))
        if self._audio_len_off is not None:
            fh.seek(self._audio_len_off)
            fh.write(struct.pack("<I", self._audio_bytes // (2 * self.channels)))
        fh.seek(self._movi_list_off + 4)
        fh.write(struct.pack("<I", movi_end - self._movi_list_off - 8))
        fh.close()

    def __enter__(self) -> "AviWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise AviFormatError("truncated file")
    return data


def read_avi_info(path: str | Path) -> AviInfo:
    """Parse headers only; no frame decoding."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(12)
        if len(magic) < 12 or magic[:4] != b"RIFF" or magic[8:12] != b"AVI ":
            raise AviFormatError(f"{path}: not a RIFF/AVI file")
        info = AviInfo(path=str(path))
        _scan_lists(fh, info)
        if not info.has_video and not info.has_audio:
            raise AviFormatError(f"{path}: no streams found")
        return info


def _scan_lists(fh: BinaryIO, info: AviInfo) -> None:
    while True:
        header = fh.read(8)
        if len(header) < 8:
            return
        fourcc, size = struct.unpack("<4sI", header)
        start = fh.tell()
        if fourcc == b"LIST":
            list_type = _read_exact(fh, 4)
            if list_type == b"hdrl":
                _parse_hdrl(fh, start + size, info)
            elif list_type == b"INFO":
                _parse_info(fh, start + size, info)
            elif list_type == b"movi":
                info.movi_offset = fh.tell() - 4
        fh.seek(start + size + (size % 2))


def _parse_hdrl(fh: BinaryIO, end: int, info: AviInfo) -> None:
    current_type = None
    while fh.tell() < end:
        fourcc, size = struct.unpack("<4sI", _read_exact(fh, 8))
        start = fh.tell()
        if fourcc == b"LIST":
            fh.seek(start + 4)  # descend into strl
            continue
        if fourcc == b"strh":
            payload = _read_exact(fh, size)
            stream_type = payload[:4]
            scale, rate, _, length = struct.unpack("<IIII", payload[20:36])
            (sample_size,) = struct.unpack("<I", payload[44:48])
            if stream_type == b"vids":
                current_type = "vids"
                info.has_video = True
                info.video.fps = rate / scale if scale else 0.0
                info.video.n_frames = length
            elif stream_type == b"auds":
                current_type = "auds"
                info.has_audio = True
                info.audio.n_samples = length
        elif fourcc == b"strf":
            payload = _read_exact(fh, size)
            if current_type == "vids" and size >= 40:
                _, width, height = struct.unpack("<Iii", payload[:12])
                info.video.width = width
                info.video.height = abs(height)
            elif current_type == "auds" and size >= 16:
                _, channels, sample_rate, _, _, _ = struct.unpack("<HHIIHH", payload[:16])
                info.audio.channels = channels
                info.audio.sample_rate = sample_rate
        fh.seek(start + size + (size % 2))


def _parse_info(fh: BinaryIO, end: int, info: AviInfo) -> None:
    while fh.tell() < end:
        fourcc, size = struct.unpack("<4sI", _read_exact(fh, 8))
        payload = _read_exact(fh, size)
        info.tags[fourcc.decode("ascii").strip()] = payload.rstrip(b"\x00").decode("utf-8", "replace")
        if size % 2:
            fh.seek(1, 1)


class AviReader:
    """Iterates movi chunks; MJPEG frames come out as raw JPEG bytes."""

    def __init__(self, path: str | Path):
        self.info = read_avi_info(path)
        self._fh = open(path, "rb")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "AviReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def iter_chunks(self) -> Iterator[tuple[bytes, bytes]]:
        """Yield (chunk_id, payload) for every movi chunk in file order."""
        fh = self._fh
        fh.seek(self.info.movi_offset)
        list_type = _read_exact(fh, 4)
        if list_type != b"movi":
            raise AviFormatError("movi offset does not point at a movi list")
        while True:
            header = fh.read(8)
            if len(header) < 8:
                return
            fourcc, size = struct.unpack("<4sI", header)
            if fourcc in (b"idx1", b"LIST", b"RIFF"):
                if fourcc != b"idx1":
                    fh.seek(size + (size % 2), 1)
                    continue
                return
            payload = _read_exact(fh, size)
            if size % 2:
                fh.seek(1, 1)
            yield fourcc, payload

    def iter_frames(self) -> Iterator[bytes]:
        for fourcc, payload in self.iter_chunks():
            if fourcc == VIDEO_CHUNK:
                yield payload

    def read_audio(self) -> bytes:
        return b"".join(p for fourcc, p in self.iter_chunks() if fourcc == AUDIO_CHUNK)


def encode_tags(software: str, params: dict) -> dict[str, str]:
    """Standard tag pair recorded by the reference transcoder."""
    return {"ISFT": software, "ICMT": json.dumps(params, sort_keys=True)}
