#!/usr/bin/env python3
"""Reference implementation of the feature bit-stream, written from the
format description in include/mttf/feature_codec.hpp. Its payloads are frozen
into tests/test_feature_codec.cpp to pin the C++ coder bit-exactly."""

import json
import zlib

TOP = 1 << 24
RESCALE = 1 << 15


class Model:
    def __init__(self):
        self.c0 = 1
        self.c1 = 1

    def p0(self):
        return min(max((self.c0 << 16) // (self.c0 + self.c1), 1), 65535)

    def update(self, bit):
        if bit:
            self.c1 += 1
        else:
            self.c0 += 1
        if self.c0 + self.c1 > RESCALE:
            self.c0 = (self.c0 + 1) // 2
            self.c1 = (self.c1 + 1) // 2


class Encoder:
    def __init__(self):
        self.low = 0
        self.range = 0xFFFFFFFF
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def shift_low(self):
        if self.low < 0xFF000000 or self.low >= (1 << 32):
            carry = self.low >> 32
            temp = self.cache
            while True:
                self.out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if self.cache_size == 0:
                    break
            self.cache = (self.low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def code(self, bit, p0):
        bound = (self.range >> 16) * p0
        if bit == 0:
            self.range = bound
        else:
            self.low += bound
            self.range -= bound
        while self.range < TOP:
            self.range = (self.range << 8) & 0xFFFFFFFF
            self.shift_low()

    def finish(self):
        for _ in range(5):
            self.shift_low()
        return bytes(self.out)


def encode(frames, nf):
    contexts = [[Model() for _ in range(10)] for _ in range(2)]
    enc = Encoder()

    def ctx_bit(bit, model):
        enc.code(bit, model.p0())
        model.update(bit)

    for frame in frames:
        assert len(frame) == 2 * nf
        for k, s in enumerate(frame):
            g = contexts[0 if k < nf else 1]
            ctx_bit(1 if s != 0 else 0, g[0])
            if s == 0:
                continue
            ctx_bit(1 if s < 0 else 0, g[1])
            v = abs(s)
            k_len = v.bit_length() - 1
            for j in range(k_len):
                ctx_bit(1, g[2 + min(j, 7)])
            ctx_bit(0, g[2 + min(k_len, 7)])
            for j in range(k_len - 1, -1, -1):
                enc.code((v >> j) & 1, 1 << 15)
    return enc.finish()


def mixed_frames():
    # N_F = 4, six frames with small, large and sign-varied symbols.
    return [
        [0, 1, -1, 2, 0, 0, 3, -4],
        [5, -6, 7, -8, 0, 1, 0, -1],
        [0, 0, 0, 0, 0, 0, 0, 0],
        [1000, -70000, 31, -32, 33, 0, -1, 1],
        [2147483647, -2147483647, 0, 255, -256, 2, -2, 0],
        [1, 1, 1, 1, -1, -1, -1, -1],
    ]


def long_frames():
    # N_F = 20, 2000 frames; long enough to trigger count rescaling.
    out = []
    for i in range(2000):
        row = []
        for j in range(40):
            if (i * 31 + j * 17) % 5 != 0:
                row.append(0)
            else:
                row.append(((i * 7919 + j * 104729) % 11) - 5)
        out.append(row)
    return out


def main():
    zeros = encode([[0] * 40], 20)
    empty = encode([], 20)
    mixed = encode(mixed_frames(), 4)
    long_payload = encode(long_frames(), 20)
    print(json.dumps({
        "zeros40_hex": zeros.hex(),
        "empty_hex": empty.hex(),
        "mixed_hex": mixed.hex(),
        "long_len": len(long_payload),
        "long_crc32": "%08x" % zlib.crc32(long_payload),
        "long_head_hex": long_payload[:16].hex(),
    }, indent=2))


if __name__ == "__main__":
    main()
