# Reimplements the partition sampler with Python integers and prints the
# FNV-1a hash pinned in acceptance.cpp (10 classes x 120 items, seed 42).

M = (1 << 64) - 1
def mix64(z):
    z = (z + 0x9e3779b97f4a7c15) & M
    z = ((z ^ (z >> 30)) * 0xbf58476d1ce4e5b9) & M
    z = ((z ^ (z >> 27)) * 0x94d049bb133111eb) & M
    return z ^ (z >> 31)
def hash_words(ws):
    h = 0x243f6a8885a308d3
    for w in ws: h = mix64(h ^ mix64(w))
    return h
def below(key, i, bound):
    return (mix64(key ^ mix64(i)) * bound) >> 64
y = [c for i in range(120) for c in range(10)]
by = [[i for i, l in enumerate(y) if l == c] for c in range(10)]
h = 0xcbf29ce484222325
def mix(v):
    global h
    for b in range(8):
        h ^= (v >> (8 * b)) & 0xff
        h = (h * 0x100000001b3) & M
for size in range(10, 101, 10):
    for rep in range(10):
        tr = set()
        for c in range(10):
            order = list(by[c]); key = hash_words([42, size, rep, c])
            for i in range(len(order) - 1, 0, -1):
                j = below(key, i, i + 1); order[i], order[j] = order[j], order[i]
            tr.update(order[:size])
        mix(size); mix(rep)
        for i in sorted(tr): mix(i)
        mix(M)
        for i in range(len(y)):
            if i not in tr: mix(i)
print(hex(h))
