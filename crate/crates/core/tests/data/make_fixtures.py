# Builds third-party pcap fixtures with scapy (not part of the crate).
import struct
from scapy.all import Ether, Dot1Q, IP, UDP, TCP, ARP, Raw, PcapWriter

def tlv(tag, content):
    assert len(content) < 128
    return bytes([tag, len(content)]) + content

# a hand-assembled GOOSE PDU, independent of the crate's encoder
fields = b"".join([
    tlv(0x80, b"SCAPY1LD0/LLN0$GO$gcb1"),
    tlv(0x81, struct.pack(">H", 4000)),
    tlv(0x82, b"SCAPY1LD0/LLN0$ds1"),
    tlv(0x83, b"gcb1"),
    tlv(0x84, struct.pack(">I", 1436538296) + bytes([0x12, 0x34, 0x56, 0x0A])),
    tlv(0x85, bytes([0x05])),
    tlv(0x86, bytes([0x03])),
    tlv(0x87, bytes([0x00])),
    tlv(0x88, bytes([0x01])),
    tlv(0x89, bytes([0x00])),
    tlv(0x8A, bytes([0x02])),
    tlv(0xAB, tlv(0x83, b"\x01") + tlv(0x85, b"\x2a")),
])
pdu = bytes([0x61, 0x81, len(fields)]) if len(fields) > 127 else bytes([0x61, len(fields)])
pdu += fields
goose = struct.pack(">HHHH", 0x0003, 8 + len(pdu), 0, 0) + pdu

src = "00:50:c2:fa:b7:1a"
pkts = [
    Ether(src=src, dst="01:0c:cd:01:00:01", type=0x88B8) / Raw(goose),
    Ether(src=src, dst="01:0c:cd:01:00:01") / Dot1Q(prio=4, vlan=0, type=0x88B8) / Raw(goose),
    Ether(src="00:11:22:33:44:55", dst="ff:ff:ff:ff:ff:ff") / ARP(psrc="10.0.0.1", pdst="10.0.0.2"),
    Ether(src="00:11:22:33:44:55", dst="00:50:c2:fa:b7:1a") / IP(src="10.0.0.1", dst="10.0.0.2") / UDP(sport=1234, dport=102) / Raw(b"x" * 900),
    Ether(src="00:11:22:33:44:55", dst="00:50:c2:fa:b7:1a") / Dot1Q(prio=0, vlan=10) / IP(src="10.0.0.1", dst="10.0.0.2") / TCP(sport=5000, dport=102, flags="S"),
]
for i, p in enumerate(pkts):
    p.time = 1436538296.5 + i * 0.001234

w = PcapWriter("scapy_micro.pcap", linktype=1, sync=True)
w.write(pkts)
w.close()
w = PcapWriter("scapy_nano_be.pcap", linktype=1, nano=True, endianness=">", sync=True)
w.write(pkts)
w.close()
w = PcapWriter("scapy_snaplen96.pcap", linktype=1, snaplen=96, sync=True)
w.write(pkts)
w.close()
print(len(goose))
