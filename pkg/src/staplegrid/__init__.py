"""staplegrid: OCSP revocation-checking stack for device fleets.

Subsystems: wire codec (`codec`), fixture authority (`authority`),
CRL-blacklist responder (`responder`), stapling cache (`cache`),
signed-collection bitmaps (`signed_collection`), DLMS handshake
simulator (`dlms`), benchmark harness (`bench`), HTTP service
(`service`), and the `staplegrid` CLI (`cli`).
"""

__version__ = "0.1.0"
