"""Huffman entropy coding of baseline scans (numba kernels + table builders).

Kernels work on a single concatenated ``(n_blocks, 64)`` zigzag-ordered
coefficient array; ``order`` lists the rows in scan order and ``slot`` the
scan-component index of each of those blocks.
"""

import numba as nb
import numpy as np

# Kernel status codes.
OK = 0
BAD_CODE = 1
TRUNCATED = 2
BAD_RESTART = 3
BAD_RUN = 4
OVERFLOW = 5
NO_SYMBOL = 6


class HuffmanSpec:
    """A Huffman table in DHT form (BITS, HUFFVAL) with derived code tables."""

    def __init__(self, bits, vals):
        self.bits = tuple(int(b) for b in bits)
        self.vals = tuple(int(v) for v in vals)
        if len(self.bits) != 16 or sum(self.bits) != len(self.vals):
            raise ValueError("inconsistent Huffman table")
        self.codes = np.zeros(256, dtype=np.int64)
        self.sizes = np.zeros(256, dtype=np.int64)
        self.lut_sym = np.zeros(1 << 16, dtype=np.uint8)
        self.lut_len = np.zeros(1 << 16, dtype=np.uint8)
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(self.bits[length - 1]):
                if code >= (1 << length):
                    raise ValueError("Huffman code space overflow")
                sym = self.vals[k]
                self.codes[sym] = code
                self.sizes[sym] = length
                lo = code << (16 - length)
                hi = (code + 1) << (16 - length)
                self.lut_sym[lo:hi] = sym
                self.lut_len[lo:hi] = length
                code += 1
                k += 1
            code <<= 1

    def __eq__(self, other):
        return isinstance(other, HuffmanSpec) and (self.bits, self.vals) == (other.bits, other.vals)

    def __hash__(self):
        return hash((self.bits, self.vals))


@nb.njit(cache=True)
def _fill(data, pos, buf, nbits, eof, phantom):
    n = data.shape[0]
    while nbits <= 48:
        if eof:
            buf = buf << 8
            nbits += 8
            phantom += 8
            continue
        if pos >= n:
            eof = True
            continue
        b = data[pos]
        if b == 0xFF:
            if pos + 1 < n and data[pos + 1] == 0:
                pos += 2
            else:
                eof = True
                continue
        else:
            pos += 1
        buf = (buf << 8) | b
        nbits += 8
    return pos, buf, nbits, eof, phantom


@nb.njit(cache=True)
def _extend(v, s):
    if v < (1 << (s - 1)):
        return v - (1 << s) + 1
    return v


@nb.njit(cache=True)
def decode_scan(data, pos, out, order, slot, dc_tab, ac_tab, lut_sym, lut_len,
                blocks_per_mcu, restart_interval, nslots):
    """Decode one scan into ``out``. Returns (status, position after scan data)."""
    buf = np.int64(0)
    nbits = 0
    eof = False
    phantom = 0
    pred = np.zeros(nslots, dtype=np.int64)
    nblocks = order.shape[0]
    mcus_done = 0
    for i in range(nblocks):
        if restart_interval > 0 and i > 0 and i % blocks_per_mcu == 0:
            mcus_done += 1
            if mcus_done % restart_interval == 0:
                # byte-align, consume RSTn, reset predictors
                if pos + 1 >= data.shape[0] or data[pos] != 0xFF or data[pos + 1] < 0xD0 or data[pos + 1] > 0xD7:
                    return BAD_RESTART, pos
                pos += 2
                buf = np.int64(0)
                nbits = 0
                eof = False
                phantom = 0
                for k in range(nslots):
                    pred[k] = 0
        row = order[i]
        sl = slot[i]
        t = dc_tab[sl]
        pos, buf, nbits, eof, phantom = _fill(data, pos, buf, nbits, eof, phantom)
        look = (buf >> (nbits - 16)) & 0xFFFF
        ln = lut_len[t, look]
        if ln == 0:
            return BAD_CODE, pos
        s = lut_sym[t, look]
        nbits -= ln
        diff = 0
        if s > 0:
            if s > 11:
                return BAD_CODE, pos
            v = (buf >> (nbits - s)) & ((1 << s) - 1)
            nbits -= s
            diff = _extend(v, s)
        buf &= (np.int64(1) << nbits) - 1
        pred[sl] += diff
        out[row, 0] = pred[sl]
        t = ac_tab[sl]
        k = 1
        while k < 64:
            pos, buf, nbits, eof, phantom = _fill(data, pos, buf, nbits, eof, phantom)
            look = (buf >> (nbits - 16)) & 0xFFFF
            ln = lut_len[t, look]
            if ln == 0:
                return BAD_CODE, pos
            rs = lut_sym[t, look]
            nbits -= ln
            r = rs >> 4
            s = rs & 15
            if s == 0:
                buf &= (np.int64(1) << nbits) - 1
                if r == 15:
                    k += 16
                    continue
                break
            k += r
            if k > 63:
                return BAD_RUN, pos
            v = (buf >> (nbits - s)) & ((1 << s) - 1)
            nbits -= s
            buf &= (np.int64(1) << nbits) - 1
            out[row, k] = _extend(v, s)
            k += 1
        if k > 64:
            return BAD_RUN, pos
        if nbits < phantom:
            return TRUNCATED, pos
    return OK, pos


@nb.njit(cache=True)
def _bit_size(a):
    s = 0
    while a > 0:
        s += 1
        a >>= 1
    return s


@nb.njit(cache=True)
def encode_scan(zz, order, slot, dc_tab, ac_tab, codes, sizes, nslots, out):
    """Entropy-code blocks into ``out`` with byte stuffing. Returns (status, length)."""
    buf = np.int64(0)
    nbits = 0
    p = 0
    # worst case per block: 64 symbols of 16 + 11 bits, every byte stuffed
    limit = out.shape[0] - 512
    pred = np.zeros(nslots, dtype=np.int64)
    for i in range(order.shape[0]):
        if p > limit:
            return OVERFLOW, p
        row = order[i]
        sl = slot[i]
        # 64 coefficients -> up to 64 (code, value) pairs; flush per symbol
        for k in range(64):
            v = np.int64(zz[row, k])
            if k == 0:
                diff = v - pred[sl]
                pred[sl] = v
                a = diff if diff >= 0 else -diff
                s = _bit_size(a)
                t = dc_tab[sl]
                sym = s
                if sizes[t, sym] == 0:
                    return NO_SYMBOL, p
                buf = (buf << sizes[t, sym]) | codes[t, sym]
                nbits += sizes[t, sym]
                if s > 0:
                    val = diff if diff >= 0 else diff - 1
                    buf = (buf << s) | (val & ((1 << s) - 1))
                    nbits += s
                while nbits >= 8:
                    b = (buf >> (nbits - 8)) & 0xFF
                    out[p] = b
                    p += 1
                    if b == 0xFF:
                        out[p] = 0
                        p += 1
                    nbits -= 8
                buf &= (np.int64(1) << nbits) - 1
                run = 0
                continue
            if v == 0:
                run += 1
                if k == 63:
                    t = ac_tab[sl]
                    buf = (buf << sizes[t, 0]) | codes[t, 0]
                    nbits += sizes[t, 0]
                continue
            t = ac_tab[sl]
            while run > 15:
                buf = (buf << sizes[t, 0xF0]) | codes[t, 0xF0]
                nbits += sizes[t, 0xF0]
                run -= 16
                while nbits >= 8:
                    b = (buf >> (nbits - 8)) & 0xFF
                    out[p] = b
                    p += 1
                    if b == 0xFF:
                        out[p] = 0
                        p += 1
                    nbits -= 8
                buf &= (np.int64(1) << nbits) - 1
            a = v if v >= 0 else -v
            s = _bit_size(a)
            sym = (run << 4) | s
            if sizes[t, sym] == 0:
                return NO_SYMBOL, p
            buf = (buf << sizes[t, sym]) | codes[t, sym]
            nbits += sizes[t, sym]
            val = v if v >= 0 else v - 1
            buf = (buf << s) | (val & ((1 << s) - 1))
            nbits += s
            run = 0
            while nbits >= 8:
                b = (buf >> (nbits - 8)) & 0xFF
                out[p] = b
                p += 1
                if b == 0xFF:
                    out[p] = 0
                    p += 1
                nbits -= 8
            buf &= (np.int64(1) << nbits) - 1
        while nbits >= 8:
            b = (buf >> (nbits - 8)) & 0xFF
            out[p] = b
            p += 1
            if b == 0xFF:
                out[p] = 0
                p += 1
            nbits -= 8
        buf &= (np.int64(1) << nbits) - 1
    if nbits > 0:
        pad = 8 - nbits
        b = ((buf << pad) | ((1 << pad) - 1)) & 0xFF
        out[p] = b
        p += 1
        if b == 0xFF:
            out[p] = 0
            p += 1
    return OK, p


def stack_tables(specs):
    """Stack HuffmanSpecs into the 2-D arrays the kernels index by table number."""
    codes = np.stack([s.codes for s in specs])
    sizes = np.stack([s.sizes for s in specs])
    lut_sym = np.stack([s.lut_sym for s in specs])
    lut_len = np.stack([s.lut_len for s in specs])
    return codes, sizes, lut_sym, lut_len
