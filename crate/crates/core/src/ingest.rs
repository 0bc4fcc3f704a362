//! Classic pcap capture parsing and writing.
//!
//! Layout: a 24-byte global header (magic, version major/minor, thiszone,
//! sigfigs, snaplen, linktype) followed by records made of a 16-byte header
//! (ts_sec, ts_usec, incl_len, orig_len) and `incl_len` data bytes. All
//! integers use the byte order implied by the magic number. Only the
//! microsecond magic and Ethernet link type are accepted.

use alloc::vec::Vec;

use crate::Timestamp;

const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

pub const LINKTYPE_ETHERNET: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    BigEndian,
    LittleEndian,
}

impl ByteOrder {
    fn u32(self, b: &[u8]) -> u32 {
        let arr = [b[0], b[1], b[2], b[3]];
        match self {
            ByteOrder::BigEndian => u32::from_be_bytes(arr),
            ByteOrder::LittleEndian => u32::from_le_bytes(arr),
        }
    }

    fn u16(self, b: &[u8]) -> u16 {
        let arr = [b[0], b[1]];
        match self {
            ByteOrder::BigEndian => u16::from_be_bytes(arr),
            ByteOrder::LittleEndian => u16::from_le_bytes(arr),
        }
    }

    fn put_u32(self, out: &mut Vec<u8>, v: u32) {
        match self {
            ByteOrder::BigEndian => out.extend_from_slice(&v.to_be_bytes()),
            ByteOrder::LittleEndian => out.extend_from_slice(&v.to_le_bytes()),
        }
    }

    fn put_u16(self, out: &mut Vec<u8>, v: u16) {
        match self {
            ByteOrder::BigEndian => out.extend_from_slice(&v.to_be_bytes()),
            ByteOrder::LittleEndian => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureHeader {
    pub byte_order: ByteOrder,
    pub version_major: u16,
    pub version_minor: u16,
    pub thiszone: i32,
    pub sigfigs: u32,
    pub snap_length: u32,
    pub link_type: u32,
}

impl CaptureHeader {
    /// Version 2.4 Ethernet header with the given snap length.
    pub fn ethernet(byte_order: ByteOrder, snap_length: u32) -> Self {
        CaptureHeader {
            byte_order,
            version_major: 2,
            version_minor: 4,
            thiszone: 0,
            sigfigs: 0,
            snap_length,
            link_type: LINKTYPE_ETHERNET,
        }
    }
}

/// One captured frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    /// 0-based position among the records returned by the reader.
    pub index: u64,
    pub ts: Timestamp,
    pub captured_len: u32,
    pub original_len: u32,
    pub data: Vec<u8>,
}

impl PacketRecord {
    /// Record whose captured and original length equal `data.len()`.
    pub fn new(index: u64, ts: Timestamp, data: Vec<u8>) -> Self {
        let len = data.len() as u32;
        PacketRecord {
            index,
            ts,
            captured_len: len,
            original_len: len,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("not a classic pcap capture (magic {0:#010x})")]
    UnknownMagic(u32),
    #[error("unsupported link type {0}")]
    UnsupportedLinkType(u32),
    #[error("capture header truncated ({0} bytes available)")]
    TruncatedHeader(usize),
    #[error("invalid snap length 0")]
    ZeroSnapLength,
    #[error("packet {index} truncated: needs {needed} bytes, {available} remain")]
    TruncatedPacket {
        index: u64,
        needed: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub packets_read: u64,
    pub bytes_read: u64,
    pub errors: u64,
}

/// Sequential reader over an in-memory capture.
#[derive(Debug)]
pub struct CaptureReader<'a> {
    header: CaptureHeader,
    data: &'a [u8],
    pos: usize,
    next_index: u64,
    stats: IngestStats,
    finished: bool,
}

impl<'a> CaptureReader<'a> {
    pub fn open(data: &'a [u8]) -> Result<Self, IngestError> {
        if data.len() < GLOBAL_HEADER_LEN {
            return Err(IngestError::TruncatedHeader(data.len()));
        }
        let byte_order = match u32::from_be_bytes([data[0], data[1], data[2], data[3]]) {
            MAGIC_MICROS => ByteOrder::BigEndian,
            m if m.swap_bytes() == MAGIC_MICROS => ByteOrder::LittleEndian,
            m => return Err(IngestError::UnknownMagic(m)),
        };
        let header = CaptureHeader {
            byte_order,
            version_major: byte_order.u16(&data[4..]),
            version_minor: byte_order.u16(&data[6..]),
            thiszone: byte_order.u32(&data[8..]) as i32,
            sigfigs: byte_order.u32(&data[12..]),
            snap_length: byte_order.u32(&data[16..]),
            link_type: byte_order.u32(&data[20..]),
        };
        if header.link_type != LINKTYPE_ETHERNET {
            return Err(IngestError::UnsupportedLinkType(header.link_type));
        }
        if header.snap_length == 0 {
            return Err(IngestError::ZeroSnapLength);
        }
        Ok(CaptureReader {
            header,
            data,
            pos: GLOBAL_HEADER_LEN,
            next_index: 0,
            stats: IngestStats::default(),
            finished: false,
        })
    }

    pub fn header(&self) -> &CaptureHeader {
        &self.header
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Returns the next record, `Ok(None)` at end of capture.
    ///
    /// Records whose header is inconsistent (`incl_len > orig_len`,
    /// `incl_len > snaplen`, `ts_usec >= 10^6`) are skipped and counted as
    /// errors. Truncation is reported once and ends the stream.
    pub fn next_packet(&mut self) -> Result<Option<PacketRecord>, IngestError> {
        let order = self.header.byte_order;
        loop {
            if self.finished {
                return Ok(None);
            }
            let rest = &self.data[self.pos..];
            if rest.is_empty() {
                self.finished = true;
                return Ok(None);
            }
            if rest.len() < RECORD_HEADER_LEN {
                return Err(self.truncated(RECORD_HEADER_LEN, rest.len()));
            }
            let ts_sec = order.u32(&rest[0..]);
            let ts_usec = order.u32(&rest[4..]);
            let incl_len = order.u32(&rest[8..]);
            let orig_len = order.u32(&rest[12..]);
            let body = &rest[RECORD_HEADER_LEN..];
            if body.len() < incl_len as usize {
                return Err(self.truncated(RECORD_HEADER_LEN + incl_len as usize, rest.len()));
            }
            self.pos += RECORD_HEADER_LEN + incl_len as usize;
            if incl_len > orig_len || incl_len > self.header.snap_length || ts_usec >= 1_000_000 {
                self.stats.errors += 1;
                continue;
            }
            let record = PacketRecord {
                index: self.next_index,
                ts: Timestamp::new(ts_sec, ts_usec),
                captured_len: incl_len,
                original_len: orig_len,
                data: body[..incl_len as usize].to_vec(),
            };
            self.next_index += 1;
            self.stats.packets_read += 1;
            self.stats.bytes_read += incl_len as u64;
            return Ok(Some(record));
        }
    }

    fn truncated(&mut self, needed: usize, available: usize) -> IngestError {
        self.finished = true;
        self.stats.errors += 1;
        IngestError::TruncatedPacket {
            index: self.next_index,
            needed,
            available,
        }
    }
}

impl Iterator for CaptureReader<'_> {
    type Item = Result<PacketRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

/// Serializes a capture in the requested byte order.
#[derive(Debug)]
pub struct CaptureWriter {
    header: CaptureHeader,
    buf: Vec<u8>,
}

impl CaptureWriter {
    pub fn new(header: CaptureHeader) -> Self {
        let order = header.byte_order;
        let mut buf = Vec::with_capacity(GLOBAL_HEADER_LEN);
        order.put_u32(&mut buf, MAGIC_MICROS);
        order.put_u16(&mut buf, header.version_major);
        order.put_u16(&mut buf, header.version_minor);
        order.put_u32(&mut buf, header.thiszone as u32);
        order.put_u32(&mut buf, header.sigfigs);
        order.put_u32(&mut buf, header.snap_length);
        order.put_u32(&mut buf, header.link_type);
        CaptureWriter { header, buf }
    }

    pub fn write_packet(&mut self, p: &PacketRecord) {
        let order = self.header.byte_order;
        order.put_u32(&mut self.buf, p.ts.secs);
        order.put_u32(&mut self.buf, p.ts.micros);
        order.put_u32(&mut self.buf, p.captured_len);
        order.put_u32(&mut self.buf, p.original_len);
        self.buf.extend_from_slice(&p.data);
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

/// Writes a complete capture from a packet list.
pub fn write_capture(header: CaptureHeader, packets: &[PacketRecord]) -> Vec<u8> {
    let mut w = CaptureWriter::new(header);
    for p in packets {
        w.write_packet(p);
    }
    w.into_bytes()
}

/// Reads all records, stopping at the first truncation error.
pub fn read_all(data: &[u8]) -> Result<(CaptureHeader, Vec<PacketRecord>, IngestStats), IngestError> {
    let mut reader = CaptureReader::open(data)?;
    let mut packets = Vec::new();
    while let Some(p) = reader.next_packet()? {
        packets.push(p);
    }
    Ok((reader.header.clone(), packets, reader.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn header_bytes(magic: [u8; 4], link: u32) -> Vec<u8> {
        let mut b = magic.to_vec();
        // big-endian fields regardless of magic: only used for error paths
        b.extend_from_slice(&[0, 2, 0, 4]);
        b.extend_from_slice(&[0; 8]);
        b.extend_from_slice(&65535u32.to_be_bytes());
        b.extend_from_slice(&link.to_be_bytes());
        b
    }

    #[test]
    fn magic_selects_byte_order() {
        let be = header_bytes([0xa1, 0xb2, 0xc3, 0xd4], 1);
        let r = CaptureReader::open(&be).unwrap();
        assert_eq!(r.header().byte_order, ByteOrder::BigEndian);
        assert_eq!(r.header().snap_length, 65535);

        let le = write_capture(CaptureHeader::ethernet(ByteOrder::LittleEndian, 65535), &[]);
        assert_eq!(&le[..4], &[0xd4, 0xc3, 0xb2, 0xa1]);
        let r = CaptureReader::open(&le).unwrap();
        assert_eq!(r.header().byte_order, ByteOrder::LittleEndian);
        assert_eq!(r.header().version_major, 2);
        assert_eq!(r.header().version_minor, 4);
    }

    #[test]
    fn short_input_is_truncated_header() {
        assert_eq!(
            CaptureReader::open(&[0u8; 10]).unwrap_err(),
            IngestError::TruncatedHeader(10)
        );
        let mut bytes = header_bytes([0xa1, 0xb2, 0xc3, 0xd4], 1);
        bytes.truncate(20);
        assert_eq!(
            CaptureReader::open(&bytes).unwrap_err(),
            IngestError::TruncatedHeader(20)
        );
    }

    #[test]
    fn rejects_nanosecond_magic_and_other_link_types() {
        let ns = header_bytes([0xa1, 0xb2, 0x3c, 0x4d], 1);
        assert_eq!(
            CaptureReader::open(&ns).unwrap_err(),
            IngestError::UnknownMagic(0xa1b2_3c4d)
        );
        let raw = header_bytes([0xa1, 0xb2, 0xc3, 0xd4], 101);
        assert_eq!(
            CaptureReader::open(&raw).unwrap_err(),
            IngestError::UnsupportedLinkType(101)
        );
    }

    #[test]
    fn empty_capture_ends_immediately() {
        let bytes = write_capture(CaptureHeader::ethernet(ByteOrder::BigEndian, 65535), &[]);
        let mut r = CaptureReader::open(&bytes).unwrap();
        assert_eq!(r.stats(), IngestStats::default());
        assert_eq!(r.next_packet().unwrap(), None);
        assert_eq!(r.next_packet().unwrap(), None);
    }

    #[test]
    fn oversized_incl_len_is_truncation_at_that_index() {
        let hdr = CaptureHeader::ethernet(ByteOrder::LittleEndian, 65535);
        let ok = PacketRecord::new(0, Timestamp::from_secs(1), vec![1, 2, 3]);
        let mut bytes = write_capture(hdr, core::slice::from_ref(&ok));
        // second record claims 5000 bytes but only 100 follow
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&5000u32.to_le_bytes());
        bytes.extend_from_slice(&5000u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 100]);

        let mut r = CaptureReader::open(&bytes).unwrap();
        assert_eq!(r.next_packet().unwrap(), Some(ok));
        match r.next_packet() {
            Err(IngestError::TruncatedPacket { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected truncation, got {other:?}"),
        }
        assert_eq!(r.next_packet().unwrap(), None);
        assert_eq!(
            r.stats(),
            IngestStats {
                packets_read: 1,
                bytes_read: 3,
                errors: 1
            }
        );
    }

    #[test]
    fn inconsistent_record_is_skipped_not_fatal() {
        let hdr = CaptureHeader::ethernet(ByteOrder::BigEndian, 4);
        let big = PacketRecord::new(0, Timestamp::from_secs(1), vec![0; 8]);
        let small = PacketRecord::new(1, Timestamp::from_secs(2), vec![9; 4]);
        let bytes = write_capture(hdr, &[big, small.clone()]);
        let (_, packets, stats) = read_all(&bytes).unwrap();
        assert_eq!(packets.len(), 1);
        assert_eq!(packets[0].data, small.data);
        assert_eq!(packets[0].index, 0);
        assert_eq!(stats.errors, 1);
    }

    #[test]
    fn snapped_record_keeps_original_length() {
        let hdr = CaptureHeader::ethernet(ByteOrder::BigEndian, 65535);
        let p = PacketRecord {
            index: 0,
            ts: Timestamp::new(5, 7),
            captured_len: 2,
            original_len: 1500,
            data: vec![0xab, 0xcd],
        };
        let (_, packets, _) = read_all(&write_capture(hdr, core::slice::from_ref(&p))).unwrap();
        assert_eq!(packets, vec![p]);
    }
}
