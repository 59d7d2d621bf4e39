use std::fmt::Write as _;

use serde::Serialize;

use super::{ClearMetrics, HotaMetrics, IdMetrics};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub hota: f64,
    pub mota: f64,
    pub idf1: f64,
    pub assa: f64,
    pub deta: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub idsw: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub gt_count: usize,
    pub hota_alpha: Vec<f64>,
    pub deta_alpha: Vec<f64>,
    pub assa_alpha: Vec<f64>,
}

impl MetricReport {
    pub fn new(clear: ClearMetrics, id: IdMetrics, hota: HotaMetrics) -> Self {
        Self {
            hota: hota.hota,
            mota: clear.mota,
            idf1: id.idf1,
            assa: hota.assa,
            deta: hota.deta,
            tp: clear.tp,
            fp: clear.fp,
            fn_: clear.fn_,
            idsw: clear.idsw,
            idtp: id.idtp,
            idfp: id.idfp,
            idfn: id.idfn,
            gt_count: clear.gt_count,
            hota_alpha: hota.hota_alpha,
            deta_alpha: hota.deta_alpha,
            assa_alpha: hota.assa_alpha,
        }
    }

    /// Percentages in the column order HOTA, MOTA, IDF1, AssA, DetA.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>8} {:>8} {:>8} {:>8} {:>8}", "HOTA", "MOTA", "IDF1", "AssA", "DetA");
        let _ = writeln!(
            s,
            "{:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            100.0 * self.hota,
            100.0 * self.mota,
            100.0 * self.idf1,
            100.0 * self.assa,
            100.0 * self.deta
        );
        let _ = writeln!(
            s,
            "TP {}  FP {}  FN {}  IDSW {}  GT {}",
            self.tp, self.fp, self.fn_, self.idsw, self.gt_count
        );
        s
    }

    /// One `key = value` line per scalar.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("hota", self.hota),
            ("mota", self.mota),
            ("idf1", self.idf1),
            ("assa", self.assa),
            ("deta", self.deta),
        ] {
            let _ = writeln!(s, "{k} = {v:.9}");
        }
        for (k, v) in [
            ("tp", self.tp),
            ("fp", self.fp),
            ("fn", self.fn_),
            ("idsw", self.idsw),
            ("idtp", self.idtp),
            ("idfp", self.idfp),
            ("idfn", self.idfn),
            ("gt_count", self.gt_count),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
