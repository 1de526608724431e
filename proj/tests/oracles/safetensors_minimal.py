"""Builds the one-tensor container fixture byte-by-byte and prints it as hex.

Layout: u64 little-endian header length, JSON header padded with spaces to a
multiple of 8, then the raw little-endian data section.
"""
import json
import struct

header = json.dumps(
    {"w": {"dtype": "F32", "shape": [2], "data_offsets": [0, 8]}},
    separators=(",", ":"),
).encode("utf-8")
header += b" " * ((8 - len(header) % 8) % 8)
blob = struct.pack("<Q", len(header)) + header + struct.pack("<ff", 1.0, 2.0)

# Independent check of the decoded values straight from the bytes.
n = struct.unpack_from("<Q", blob, 0)[0]
values = struct.unpack_from("<ff", blob, 8 + n)
assert values == (1.0, 2.0), values
print(len(blob))
print(blob.hex())
