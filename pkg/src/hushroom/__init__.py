"""hushroom: end-to-end encrypted ephemeral group chat.

A relay server that never sees plaintext, a client engine holding all key
material, and the crypto toolkit underneath: a Salsa20-backed CSPRNG,
fast DSA key generation, signed-DH sessions, pairwise-wrapped room
encryption, SMP buddy verification, and authenticated chunked file
transfer.
"""

__version__ = "0.1.0"
