#!/usr/bin/env python3
"""Standalone reimplementation of the item hash used by the sketch.

digest64(z) = mix64(fnv1a64(z))
h_j(z)      = ((a_j * (digest64(z) mod p) + b_j) mod p) mod w,  p = 2^61 - 1

(a_j, b_j) are drawn from SplitMix64(master_seed) by taking the top 61 bits
of each output and rejecting out-of-range values.

Run it to regenerate the frozen tables in hashing_test.cpp.
"""

MASK = (1 << 64) - 1
P = (1 << 61) - 1
GAMMA = 0x9E3779B97F4A7C15


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & MASK
    return h


def digest64(data):
    return mix64(fnv1a64(data))


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + GAMMA) & MASK
        return mix64(self.state)


def family(d, master_seed):
    rng = SplitMix64(master_seed)
    seeds = []
    for _ in range(d):
        while True:
            a = rng.next() >> 3
            if 1 <= a <= P - 1:
                break
        while True:
            b = rng.next() >> 3
            if b <= P - 1:
                break
        seeds.append((a, b))
    return seeds


def bucket(seeds, j, w, data):
    a, b = seeds[j]
    x = digest64(data) % P
    return ((a * x + b) % P) % w


if __name__ == "__main__":
    for s in (b"", b"a", b"b", b"hello"):
        print("digest64(%r) = 0x%016x" % (s, digest64(s)))
    seeds = family(2, 7)
    for j, (a, b) in enumerate(seeds):
        print("seed[%d] = (0x%016x, 0x%016x)" % (j, a, b))
    for item in ("a", "b"):
        print(item, [bucket(seeds, j, 4, item.encode()) for j in range(2)])
    seeds = family(3, 42)
    for item in ("1", "2", "3", "17", "hello"):
        print(item, [bucket(seeds, j, 1000, item.encode()) for j in range(3)])
