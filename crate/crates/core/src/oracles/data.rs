use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

struct Bundled {
    name: &'static str,
    text: &'static str,
    sha256: &'static str,
}

const TSP_TRAVEL: Bundled = Bundled {
    name: "tsp_travel.csv",
    text: include_str!("../../data/tsp_travel.csv"),
    sha256: "6e10feee5270b3af440ff291ab7e1c2c058132ca1f0f95cd8568837e475e774d",
};
const TSP_DUE: Bundled = Bundled {
    name: "tsp_due.csv",
    text: include_str!("../../data/tsp_due.csv"),
    sha256: "5ad63e293b30c0878c3444d98f3be4008b4588fde61e4d3bd41b95b92d00463d",
};
const SMS: Bundled = Bundled {
    name: "sms.csv",
    text: include_str!("../../data/sms.csv"),
    sha256: "8abdbf82a064ac95daefc5e93fd6d6f515bb32a483e189e654ad51639004a082",
};
const DRUG: Bundled = Bundled {
    name: "drug.csv",
    text: include_str!("../../data/drug.csv"),
    sha256: "56c653ab537e5234965ae20c12766636cebfecc3c95483f8b2438e64878b0100",
};

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn verify(b: &Bundled) -> Result<()> {
    if sha256_hex(b.text.as_bytes()) != b.sha256 {
        return Err(Error::Checksum(b.name.to_string()));
    }
    Ok(())
}

fn rows(b: &Bundled) -> Result<Vec<Vec<f64>>> {
    verify(b)?;
    let mut rdr = csv::Reader::from_reader(b.text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("{}: {e}", b.name))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TspInstance {
    /// `s[i][j]`: travel time from location i (0 = start) to city j+1.
    pub s: Vec<Vec<f64>>,
    pub due: Vec<f64>,
    pub a: f64,
    pub e: f64,
    pub b: f64,
    pub f: f64,
    pub stay: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmsInstance {
    pub processing: Vec<f64>,
    /// Weight of the j-th processed job.
    pub weights: Vec<f64>,
    pub revenue: f64,
}

/// One tabulated drug setting: dose levels of A and B, orders of A, B, C.
#[derive(Clone, Debug, PartialEq)]
pub struct DrugRow {
    pub x_a: u8,
    pub x_b: u8,
    pub o: [usize; 3],
    pub y: f64,
}

pub(crate) struct Tables {
    pub tsp: TspInstance,
    pub sms: SmsInstance,
    pub drug: Vec<DrugRow>,
}

fn load() -> Result<Tables> {
    let s = rows(&TSP_TRAVEL)?.into_iter().map(|r| r[1..].to_vec()).collect();
    let due = rows(&TSP_DUE)?.into_iter().map(|r| r[1]).collect();
    let sms_rows = rows(&SMS)?;
    let drug = rows(&DRUG)?
        .into_iter()
        .map(|r| DrugRow { x_a: r[0] as u8, x_b: r[2] as u8, o: [r[1] as usize, r[3] as usize, r[4] as usize], y: r[5] })
        .collect();
    Ok(Tables {
        tsp: TspInstance { s, due, a: 20.0, e: 10.0, b: 2.0, f: 15.0, stay: (1.0, 4.0) },
        sms: SmsInstance {
            processing: sms_rows.iter().map(|r| r[1]).collect(),
            weights: sms_rows.iter().map(|r| r[2]).collect(),
            revenue: 10.0,
        },
        drug,
    })
}

pub(crate) fn tables() -> Result<&'static Tables> {
    static CELL: OnceLock<std::result::Result<Tables, String>> = OnceLock::new();
    CELL.get_or_init(|| load().map_err(|e| e.to_string()))
        .as_ref()
        .map_err(|e| Error::Oracle(e.clone()))
}

pub fn tsp_instance() -> Result<TspInstance> {
    Ok(tables()?.tsp.clone())
}

pub fn sms_instance() -> Result<SmsInstance> {
    Ok(tables()?.sms.clone())
}

pub fn drug_table() -> Result<Vec<DrugRow>> {
    Ok(tables()?.drug.clone())
}
