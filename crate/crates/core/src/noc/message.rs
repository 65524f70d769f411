//! Network messages and their bit-level flit encoding.
//!
//! Every message starts with a 6-bit header (3 kind bits, then the 3 routing
//! option bits) followed by its fields in table order: network address,
//! clause address, variables, polarities, implication level, extra bit.
//! Fields are packed LSB-first into 64-bit flit payloads.

use std::fmt;

use thiserror::Error;

use crate::cnf::{Lit, Var};

pub const HEADER_BITS: u32 = 6;
pub const NET_ADDR_BITS: u32 = 10;
pub const CLAUSE_ADDR_BITS: u32 = 10;
pub const VAR_BITS: u32 = 20;
pub const POLARITY_BITS: u32 = 1;
pub const LEVEL_BITS: u32 = 14;
pub const EXTRA_BITS: u32 = 1;
pub const FLIT_BITS: u32 = 64;

/// Reserved all-ones variable value.
pub const VAR_SENTINEL: u32 = (1 << VAR_BITS) - 1;
/// Reserved all-ones address value (no clause).
pub const ADDR_SENTINEL: u16 = (1 << NET_ADDR_BITS) - 1;
pub const MAX_LEVEL: u16 = (1 << LEVEL_BITS) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MessageError {
    #[error("{field} value {value} does not fit in {bits} bits")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        bits: u32,
    },
    #[error("flit sequence is empty or not terminated")]
    Truncated,
    #[error("payload length {0} does not match any message layout")]
    BadLength(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    AddClause = 0,
    PropLit = 1,
    CancelVar = 2,
    CompleteDl = 3,
    Conflict = 4,
    NotReason = 5,
    Reason = 6,
    Strengthen = 7,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::AddClause,
        MessageKind::PropLit,
        MessageKind::CancelVar,
        MessageKind::CompleteDl,
        MessageKind::Conflict,
        MessageKind::NotReason,
        MessageKind::Reason,
        MessageKind::Strengthen,
    ];

    fn from_code(c: u64) -> MessageKind {
        MessageKind::ALL[c as usize & 7]
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::AddClause => "AddClause",
            MessageKind::PropLit => "PropLit",
            MessageKind::CancelVar => "CancelVar",
            MessageKind::CompleteDl => "CompleteDL",
            MessageKind::Conflict => "Conflict",
            MessageKind::NotReason => "NotReason",
            MessageKind::Reason => "Reason",
            MessageKind::Strengthen => "Strengthen",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The three routing option bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Routing {
    pub to_source: bool,
    pub broadcast: bool,
    pub to_central: bool,
}

impl Routing {
    pub const CENTRAL: Routing = Routing {
        to_source: false,
        broadcast: false,
        to_central: true,
    };
    pub const BROADCAST: Routing = Routing {
        to_source: true,
        broadcast: true,
        to_central: false,
    };
    pub const BROADCAST_CENTRAL: Routing = Routing {
        to_source: true,
        broadcast: true,
        to_central: true,
    };
    /// No option bits: deliver to the bank named by the network address.
    pub const ADDRESSED: Routing = Routing {
        to_source: false,
        broadcast: false,
        to_central: false,
    };

    fn bits(self) -> u64 {
        self.to_source as u64 | (self.broadcast as u64) << 1 | (self.to_central as u64) << 2
    }

    fn from_bits(b: u64) -> Routing {
        Routing {
            to_source: b & 1 != 0,
            broadcast: b & 2 != 0,
            to_central: b & 4 != 0,
        }
    }
}

/// Bank (network address) and unit (clause address) of a clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClauseAddr {
    pub bank: u16,
    pub unit: u16,
}

impl ClauseAddr {
    pub const NONE: ClauseAddr = ClauseAddr {
        bank: ADDR_SENTINEL,
        unit: ADDR_SENTINEL,
    };

    pub fn is_none(self) -> bool {
        self == ClauseAddr::NONE
    }
}

impl fmt::Display for ClauseAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_none() {
            write!(f, "-")
        } else {
            write!(f, "{}:{}", self.bank, self.unit)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    /// Loads a clause into `addr`; an empty literal list deletes the clause.
    AddClause {
        ctx: u8,
        addr: ClauseAddr,
        lits: Vec<Lit>,
    },
    /// `addr` names the implying clause (or the target clause when sent with
    /// addressed routing).
    PropLit {
        ctx: u8,
        addr: ClauseAddr,
        lit: Lit,
        level: u16,
    },
    /// `None` cancels every assignment of the current decision level.
    CancelVar {
        ctx: u8,
        var: Option<Var>,
    },
    /// `None` requests a learned-clause sharing sweep instead of a new level.
    CompleteDl {
        ctx: u8,
        var: Option<Var>,
    },
    Conflict {
        ctx: u8,
        level: u16,
    },
    NotReason {
        ctx: u8,
        addr: ClauseAddr,
    },
    /// `query` is the implied literal being traced; `tag` the literal whose
    /// antecedents are being reported (replies) or the query itself.
    Reason {
        ctx: u8,
        query: Lit,
        tag: Lit,
    },
    /// `None` starts a strengthening round (copystr).
    Strengthen {
        ctx: u8,
        lit: Option<Lit>,
    },
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::AddClause { .. } => MessageKind::AddClause,
            Message::PropLit { .. } => MessageKind::PropLit,
            Message::CancelVar { .. } => MessageKind::CancelVar,
            Message::CompleteDl { .. } => MessageKind::CompleteDl,
            Message::Conflict { .. } => MessageKind::Conflict,
            Message::NotReason { .. } => MessageKind::NotReason,
            Message::Reason { .. } => MessageKind::Reason,
            Message::Strengthen { .. } => MessageKind::Strengthen,
        }
    }

    pub fn ctx(&self) -> u8 {
        match *self {
            Message::AddClause { ctx, .. }
            | Message::PropLit { ctx, .. }
            | Message::CancelVar { ctx, .. }
            | Message::CompleteDl { ctx, .. }
            | Message::Conflict { ctx, .. }
            | Message::NotReason { ctx, .. }
            | Message::Reason { ctx, .. }
            | Message::Strengthen { ctx, .. } => ctx,
        }
    }

    /// Destination bank for addressed messages.
    pub fn net_addr(&self) -> Option<u16> {
        match *self {
            Message::AddClause { addr, .. }
            | Message::PropLit { addr, .. }
            | Message::NotReason { addr, .. } => Some(addr.bank),
            _ => None,
        }
    }

    /// Serialized length in bits.
    pub fn bit_len(&self) -> u32 {
        let lit = VAR_BITS + POLARITY_BITS;
        let addr = NET_ADDR_BITS + CLAUSE_ADDR_BITS;
        HEADER_BITS
            + match self {
                Message::AddClause { lits, .. } => addr + lits.len() as u32 * lit,
                Message::PropLit { .. } => addr + lit + LEVEL_BITS + EXTRA_BITS,
                Message::CancelVar { .. } | Message::CompleteDl { .. } => VAR_BITS,
                Message::Conflict { .. } => LEVEL_BITS + EXTRA_BITS,
                Message::NotReason { .. } => addr,
                Message::Reason { .. } => 2 * lit,
                Message::Strengthen { .. } => lit,
            }
    }

    pub fn flit_count(&self) -> usize {
        self.bit_len().div_ceil(FLIT_BITS) as usize
    }

    /// Human-readable field list for traces.
    pub fn fields(&self) -> String {
        let v = |v: Option<Var>| v.map_or("*".to_string(), |v| (v.0 + 1).to_string());
        match self {
            Message::AddClause { addr, lits, .. } => {
                let ls: Vec<String> = lits.iter().map(|l| l.to_string()).collect();
                format!("{addr},{}", ls.join(" "))
            }
            Message::PropLit {
                addr, lit, level, ..
            } => format!("{addr},{lit},{level}"),
            Message::CancelVar { var, .. } | Message::CompleteDl { var, .. } => v(*var),
            Message::Conflict { level, .. } => level.to_string(),
            Message::NotReason { addr, .. } => addr.to_string(),
            Message::Reason { query, tag, .. } => format!("{query},{tag}"),
            Message::Strengthen { lit, .. } => lit.map_or("*".to_string(), |l| l.to_string()),
        }
    }
}

/// One network transfer unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flit {
    pub payload: u64,
    /// Valid payload bits.
    pub bits: u8,
    pub last: bool,
    pub routing: Routing,
    /// Destination bank for addressed routing.
    pub dest: Option<u16>,
    /// Context id. Carried on a side wire for kinds without an extra bit.
    pub ctx: u8,
    pub kind: MessageKind,
}

struct BitWriter {
    words: Vec<u64>,
    len: u32,
}

impl BitWriter {
    fn new() -> BitWriter {
        BitWriter {
            words: Vec::new(),
            len: 0,
        }
    }

    fn put(&mut self, value: u64, width: u32, field: &'static str) -> Result<(), MessageError> {
        if width < 64 && value >> width != 0 {
            return Err(MessageError::FieldOverflow {
                field,
                value,
                bits: width,
            });
        }
        for i in 0..width {
            let pos = self.len + i;
            let w = (pos / 64) as usize;
            if w == self.words.len() {
                self.words.push(0);
            }
            self.words[w] |= ((value >> i) & 1) << (pos % 64);
        }
        self.len += width;
        Ok(())
    }
}

struct BitReader<'a> {
    words: &'a [u64],
    pos: u32,
}

impl BitReader<'_> {
    fn get(&mut self, width: u32) -> u64 {
        let mut v = 0;
        for i in 0..width {
            let p = self.pos + i;
            v |= ((self.words[(p / 64) as usize] >> (p % 64)) & 1) << i;
        }
        self.pos += width;
        v
    }
}

fn var_field(v: Option<Var>) -> u64 {
    v.map_or(VAR_SENTINEL as u64, |v| v.0 as u64)
}

fn check_var(v: Var) -> Result<(), MessageError> {
    if v.0 >= VAR_SENTINEL {
        return Err(MessageError::FieldOverflow {
            field: "variable",
            value: v.0 as u64,
            bits: VAR_BITS,
        });
    }
    Ok(())
}

fn put_lit(w: &mut BitWriter, l: Lit) -> Result<(), MessageError> {
    check_var(l.var())?;
    w.put(l.var().0 as u64, VAR_BITS, "variable")
}

fn put_addr(w: &mut BitWriter, a: ClauseAddr) -> Result<(), MessageError> {
    w.put(a.bank as u64, NET_ADDR_BITS, "network address")?;
    w.put(a.unit as u64, CLAUSE_ADDR_BITS, "clause address")
}

pub fn encode(msg: &Message, routing: Routing) -> Result<Vec<Flit>, MessageError> {
    let mut w = BitWriter::new();
    w.put(msg.kind() as u64, 3, "kind")?;
    w.put(routing.bits(), 3, "routing")?;
    match msg {
        Message::AddClause { addr, lits, .. } => {
            put_addr(&mut w, *addr)?;
            for &l in lits {
                put_lit(&mut w, l)?;
            }
            for &l in lits {
                w.put(l.is_positive() as u64, 1, "polarity")?;
            }
        }
        Message::PropLit {
            ctx,
            addr,
            lit,
            level,
        } => {
            put_addr(&mut w, *addr)?;
            put_lit(&mut w, *lit)?;
            w.put(lit.is_positive() as u64, 1, "polarity")?;
            w.put(*level as u64, LEVEL_BITS, "implication level")?;
            w.put(*ctx as u64, EXTRA_BITS, "extra")?;
        }
        Message::CancelVar { var, .. } | Message::CompleteDl { var, .. } => {
            if let Some(v) = var {
                check_var(*v)?;
            }
            w.put(var_field(*var), VAR_BITS, "variable")?;
        }
        Message::Conflict { ctx, level } => {
            w.put(*level as u64, LEVEL_BITS, "implication level")?;
            w.put(*ctx as u64, EXTRA_BITS, "extra")?;
        }
        Message::NotReason { addr, .. } => put_addr(&mut w, *addr)?,
        Message::Reason { query, tag, .. } => {
            put_lit(&mut w, *query)?;
            put_lit(&mut w, *tag)?;
            w.put(query.is_positive() as u64, 1, "polarity")?;
            w.put(tag.is_positive() as u64, 1, "polarity")?;
        }
        Message::Strengthen { lit, .. } => {
            let l = lit.unwrap_or(Var(VAR_SENTINEL).lit(true));
            if lit.is_some() {
                check_var(l.var())?;
            }
            w.put(l.var().0 as u64, VAR_BITS, "variable")?;
            w.put(l.is_positive() as u64, 1, "polarity")?;
        }
    }
    debug_assert_eq!(w.len, msg.bit_len());
    let n = w.words.len();
    let dest = if routing == Routing::ADDRESSED {
        msg.net_addr()
    } else {
        None
    };
    Ok(w.words
        .iter()
        .enumerate()
        .map(|(i, &payload)| Flit {
            payload,
            bits: if i + 1 == n {
                (w.len - 64 * i as u32) as u8
            } else {
                64
            },
            last: i + 1 == n,
            routing,
            dest,
            ctx: msg.ctx(),
            kind: msg.kind(),
        })
        .collect())
}

/// Reassembles a message from its flits.
pub fn decode(flits: &[Flit]) -> Result<(Message, Routing), MessageError> {
    let Some(last) = flits.last() else {
        return Err(MessageError::Truncated);
    };
    if !last.last {
        return Err(MessageError::Truncated);
    }
    let words: Vec<u64> = flits.iter().map(|f| f.payload).collect();
    let total: u32 = flits.iter().map(|f| f.bits as u32).sum();
    let side_ctx = last.ctx;
    let mut r = BitReader {
        words: &words,
        pos: 0,
    };
    let kind = MessageKind::from_code(r.get(3));
    let routing = Routing::from_bits(r.get(3));
    let addr = |r: &mut BitReader| ClauseAddr {
        bank: r.get(NET_ADDR_BITS) as u16,
        unit: r.get(CLAUSE_ADDR_BITS) as u16,
    };
    let opt_var = |x: u64| (x != VAR_SENTINEL as u64).then_some(Var(x as u32));
    let msg = match kind {
        MessageKind::AddClause => {
            let body = total - HEADER_BITS - NET_ADDR_BITS - CLAUSE_ADDR_BITS;
            if !body.is_multiple_of(VAR_BITS + 1) {
                return Err(MessageError::BadLength(total));
            }
            let n = body / (VAR_BITS + 1);
            let a = addr(&mut r);
            let vars: Vec<u64> = (0..n).map(|_| r.get(VAR_BITS)).collect();
            let lits = vars
                .into_iter()
                .map(|v| Var(v as u32).lit(r.get(1) == 1))
                .collect();
            Message::AddClause {
                ctx: side_ctx,
                addr: a,
                lits,
            }
        }
        MessageKind::PropLit => {
            let a = addr(&mut r);
            let v = r.get(VAR_BITS) as u32;
            let p = r.get(1) == 1;
            let level = r.get(LEVEL_BITS) as u16;
            let ctx = r.get(EXTRA_BITS) as u8;
            Message::PropLit {
                ctx,
                addr: a,
                lit: Var(v).lit(p),
                level,
            }
        }
        MessageKind::CancelVar => Message::CancelVar {
            ctx: side_ctx,
            var: opt_var(r.get(VAR_BITS)),
        },
        MessageKind::CompleteDl => Message::CompleteDl {
            ctx: side_ctx,
            var: opt_var(r.get(VAR_BITS)),
        },
        MessageKind::Conflict => {
            let level = r.get(LEVEL_BITS) as u16;
            let ctx = r.get(EXTRA_BITS) as u8;
            Message::Conflict { ctx, level }
        }
        MessageKind::NotReason => Message::NotReason {
            ctx: side_ctx,
            addr: addr(&mut r),
        },
        MessageKind::Reason => {
            let q = r.get(VAR_BITS) as u32;
            let t = r.get(VAR_BITS) as u32;
            let qp = r.get(1) == 1;
            let tp = r.get(1) == 1;
            Message::Reason {
                ctx: side_ctx,
                query: Var(q).lit(qp),
                tag: Var(t).lit(tp),
            }
        }
        MessageKind::Strengthen => {
            let v = r.get(VAR_BITS);
            let p = r.get(1) == 1;
            Message::Strengthen {
                ctx: side_ctx,
                lit: opt_var(v).map(|v| v.lit(p)),
            }
        }
    };
    if msg.bit_len() != total {
        return Err(MessageError::BadLength(total));
    }
    Ok((msg, routing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(i: u32, p: bool) -> Lit {
        Var(i).lit(p)
    }

    fn round_trip(m: &Message, r: Routing) -> Vec<Flit> {
        let flits = encode(m, r).unwrap();
        let (back, rr) = decode(&flits).unwrap();
        assert_eq!(&back, m);
        assert_eq!(rr, r);
        flits
    }

    #[test]
    fn proplit_is_one_62_bit_flit() {
        let m = Message::PropLit {
            ctx: 1,
            addr: ClauseAddr { bank: 3, unit: 17 },
            lit: x(5, true),
            level: 3,
        };
        let f = round_trip(&m, Routing::BROADCAST_CENTRAL);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].bits, 62);
        assert_eq!(m.bit_len(), 62);
    }

    #[test]
    fn conflict_is_21_bits() {
        let m = Message::Conflict { ctx: 0, level: 0 };
        let f = round_trip(&m, Routing::BROADCAST_CENTRAL);
        assert_eq!(f[0].bits, 21);
    }

    #[test]
    fn addclause_with_eight_literals_spans_flits() {
        let m = Message::AddClause {
            ctx: 0,
            addr: ClauseAddr {
                bank: 9,
                unit: 1023,
            },
            lits: (0..8).map(|i| x(i * 1000, i % 2 == 0)).collect(),
        };
        assert_eq!(m.bit_len(), 194);
        let f = round_trip(&m, Routing::ADDRESSED);
        assert_eq!(f.len(), 4);
        assert!(f[..3].iter().all(|f| !f.last && f.bits == 64));
        assert!(f[3].last);
        assert_eq!(f[0].dest, Some(9));
    }

    #[test]
    fn level_overflow_is_rejected() {
        let m = Message::PropLit {
            ctx: 0,
            addr: ClauseAddr::NONE,
            lit: x(0, true),
            level: 1 << 14,
        };
        assert!(matches!(
            encode(&m, Routing::BROADCAST),
            Err(MessageError::FieldOverflow { bits: 14, .. })
        ));
    }

    #[test]
    fn sentinel_variable_is_reserved() {
        let m = Message::CancelVar {
            ctx: 0,
            var: Some(Var(VAR_SENTINEL)),
        };
        assert!(encode(&m, Routing::BROADCAST).is_err());
        round_trip(
            &Message::CancelVar { ctx: 1, var: None },
            Routing::BROADCAST,
        );
        round_trip(
            &Message::Strengthen { ctx: 0, lit: None },
            Routing::BROADCAST,
        );
    }

    #[test]
    fn truncated_sequence_is_rejected() {
        assert_eq!(decode(&[]), Err(MessageError::Truncated));
        let mut f = encode(&Message::Conflict { ctx: 0, level: 1 }, Routing::CENTRAL).unwrap();
        f[0].last = false;
        assert_eq!(decode(&f), Err(MessageError::Truncated));
    }

    fn arb_lit() -> impl Strategy<Value = Lit> {
        (0u32..VAR_SENTINEL, any::<bool>()).prop_map(|(v, p)| Var(v).lit(p))
    }

    fn arb_addr() -> impl Strategy<Value = ClauseAddr> {
        (0u16..1024, 0u16..1024).prop_map(|(bank, unit)| ClauseAddr { bank, unit })
    }

    fn arb_msg() -> impl Strategy<Value = Message> {
        let ctx = 0u8..2;
        prop_oneof![
            (
                ctx.clone(),
                arb_addr(),
                proptest::collection::vec(arb_lit(), 0..=8)
            )
                .prop_map(|(ctx, addr, lits)| Message::AddClause { ctx, addr, lits }),
            (ctx.clone(), arb_addr(), arb_lit(), 0u16..=MAX_LEVEL).prop_map(
                |(ctx, addr, lit, level)| Message::PropLit {
                    ctx,
                    addr,
                    lit,
                    level
                }
            ),
            (ctx.clone(), proptest::option::of(0u32..VAR_SENTINEL)).prop_map(|(ctx, v)| {
                Message::CancelVar {
                    ctx,
                    var: v.map(Var),
                }
            }),
            (ctx.clone(), proptest::option::of(0u32..VAR_SENTINEL)).prop_map(|(ctx, v)| {
                Message::CompleteDl {
                    ctx,
                    var: v.map(Var),
                }
            }),
            (ctx.clone(), 0u16..=MAX_LEVEL)
                .prop_map(|(ctx, level)| Message::Conflict { ctx, level }),
            (ctx.clone(), arb_addr()).prop_map(|(ctx, addr)| Message::NotReason { ctx, addr }),
            (ctx.clone(), arb_lit(), arb_lit()).prop_map(|(ctx, query, tag)| Message::Reason {
                ctx,
                query,
                tag
            }),
            (ctx, proptest::option::of(arb_lit()))
                .prop_map(|(ctx, lit)| Message::Strengthen { ctx, lit }),
        ]
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(m in arb_msg(), r in 0u64..8) {
            let routing = Routing::from_bits(r);
            let flits = encode(&m, routing).unwrap();
            let total: u32 = flits.iter().map(|f| f.bits as u32).sum();
            prop_assert_eq!(total, m.bit_len());
            prop_assert_eq!(flits.len(), m.flit_count());
            if !matches!(m, Message::AddClause { .. }) {
                prop_assert_eq!(flits.len(), 1);
            }
            let (back, rr) = decode(&flits).unwrap();
            prop_assert_eq!(back, m);
            prop_assert_eq!(rr, routing);
        }
    }
}
