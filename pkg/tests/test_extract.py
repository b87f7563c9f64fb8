import numpy as np
import pytest

from trnglab.extract import (Bitstream, count_to_symbol, read_bitstream,
                             render_raster, symbols_to_bitstream,
                             write_bitstream)


# --- symbol extraction ---

@pytest.mark.parametrize("count,symbol", [
    (0, 0),        # low counts sit in block 0
    (15, 0),
    (16, 1),
    (80, 5),
    (112, 7),
    (127, 7),
    (128, 0),      # bit 7 is not observed
    (130, 0),
    (0x3FFF, 7),
])
def test_count_to_symbol_examples(count, symbol):
    assert count_to_symbol(count) == symbol


def test_count_to_symbol_full_window():
    for count in range(0, 1 << 14, 7):
        expected = (count // 16) % 8
        assert count_to_symbol(count) == expected


@pytest.mark.parametrize("count", [-1, 1 << 14])
def test_count_to_symbol_range(count):
    with pytest.raises(ValueError):
        count_to_symbol(count)


# --- bitstream assembly ---

def test_symbols_to_bitstream_msb_first():
    bs = symbols_to_bitstream([0, 5, 7, 1])
    assert list(bs.bits) == [0, 0, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1]
    assert bs.length == 12


def test_symbols_roundtrip_exhaustive():
    for a in range(8):
        for b in range(8):
            bs = symbols_to_bitstream([a, b])
            got_a = 4 * bs.bits[0] + 2 * bs.bits[1] + bs.bits[2]
            got_b = 4 * bs.bits[3] + 2 * bs.bits[4] + bs.bits[5]
            assert (got_a, got_b) == (a, b)


def test_symbols_validation():
    with pytest.raises(ValueError):
        symbols_to_bitstream([8])
    with pytest.raises(ValueError):
        symbols_to_bitstream([-1])


def test_bitstream_validation():
    with pytest.raises(ValueError):
        Bitstream(bits=np.array([0, 2], dtype=np.uint8), origin={})
    with pytest.raises(ValueError):
        Bitstream(bits=np.zeros((2, 2), dtype=np.uint8), origin={})


def test_empty_symbol_list():
    bs = symbols_to_bitstream([])
    assert bs.length == 0


# --- file round-trips ---

def test_write_read_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    for n in (1, 7, 8, 9, 1000):
        bs = Bitstream(bits=rng.integers(0, 2, n).astype(np.uint8),
                       origin={"seed": 3, "temperature_degC": 25.0})
        path = tmp_path / f"s{n}.bin"
        write_bitstream(bs, path)
        back = read_bitstream(path)
        assert back.length == n
        assert (back.bits == bs.bits).all()
        assert back.origin == bs.origin


def test_read_missing_sidecar(tmp_path):
    path = tmp_path / "naked.bin"
    path.write_bytes(b"\x00")
    with pytest.raises(ValueError):
        read_bitstream(path)


def test_read_truncated_payload(tmp_path):
    bs = Bitstream(bits=np.ones(64, dtype=np.uint8), origin={})
    path = tmp_path / "t.bin"
    write_bitstream(bs, path)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(ValueError):
        read_bitstream(path)


# --- raster rendering ---

def _bits(s):
    return Bitstream(bits=np.array([int(c) for c in s], dtype=np.uint8),
                     origin={})


def test_render_p1_row_major():
    out = render_raster(_bits("110100"), width=3, fmt="P1")
    assert out == b"P1\n3 2\n1 1 0\n1 0 0\n"


def test_render_p1_column_major():
    # bits fill the first column top to bottom, then the second
    out = render_raster(_bits("110100"), width=3, scan_order="column-major",
                        fmt="P1")
    assert out == b"P1\n3 2\n1 0 0\n1 1 0\n"


def test_render_pads_tail_with_white():
    out = render_raster(_bits("1111"), width=3, fmt="P1")
    assert out == b"P1\n3 2\n1 1 1\n1 0 0\n"


def test_render_p4_packs_rows():
    out = render_raster(_bits("10000001" + "11111111"), width=8)
    assert out == b"P4\n8 2\n" + bytes([0b10000001, 0b11111111])


def test_render_p4_row_padding():
    # P4 pads each row to a byte boundary
    out = render_raster(_bits("101"), width=3)
    assert out == b"P4\n3 1\n" + bytes([0b10100000])


def test_render_validation():
    bs = _bits("1")
    with pytest.raises(ValueError):
        render_raster(bs, width=0)
    with pytest.raises(ValueError):
        render_raster(bs, width=2, scan_order="spiral")
    with pytest.raises(ValueError):
        render_raster(bs, width=2, fmt="P7")


def test_render_row_and_column_are_transposes():
    rng = np.random.default_rng(9)
    bits = rng.integers(0, 2, 60).astype(np.uint8)
    bs = Bitstream(bits=bits, origin={})
    row = render_raster(bs, width=6, fmt="P1")
    col = render_raster(bs, width=10, scan_order="column-major", fmt="P1")

    def parse(p1):
        lines = p1.decode().splitlines()
        return np.array([[int(v) for v in line.split()]
                         for line in lines[2:]])

    assert (parse(row) == parse(col).T).all()
