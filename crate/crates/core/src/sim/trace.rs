use std::fmt::Write;

use crate::noc::{decode, Endpoint, Flit, NetFlit};

/// Delivered messages as CSV rows, one per message at its tail flit. The
/// first field is the context, the rest depend on the kind.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    /// Partial messages per endpoint: banks by index, central last.
    partial: Vec<Vec<Flit>>,
    rows: Vec<String>,
}

pub const TRACE_HEADER: &str = "cycle,kind,src,dst,fields";

impl Trace {
    pub fn new(banks: usize) -> Trace {
        Trace {
            partial: vec![Vec::new(); banks + 1],
            rows: Vec::new(),
        }
    }

    pub fn record(&mut self, cycle: u64, ep: Endpoint, nf: &NetFlit) {
        let slot = match ep {
            Endpoint::Bank(i) => i,
            Endpoint::Central => self.partial.len() - 1,
        };
        self.partial[slot].push(nf.flit);
        if !nf.flit.last {
            return;
        }
        let flits = std::mem::take(&mut self.partial[slot]);
        let src = if nf.from_central {
            "central".to_string()
        } else {
            format!("bank{}", nf.src)
        };
        let dst = match ep {
            Endpoint::Bank(i) => format!("bank{i}"),
            Endpoint::Central => "central".to_string(),
        };
        let (kind, fields) = match decode(&flits) {
            Ok((m, _)) => (
                m.kind().name().to_string(),
                format!("{},{}", m.ctx(), m.fields()),
            ),
            Err(e) => (
                "malformed".to_string(),
                format!("{},{e}", nf.flit.ctx).replace(',', ";"),
            ),
        };
        self.rows
            .push(format!("{cycle},{kind},{src},{dst},{fields}"));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::with_capacity(self.rows.iter().map(|r| r.len() + 1).sum::<usize>() + 32);
        writeln!(out, "{TRACE_HEADER}").unwrap();
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}
