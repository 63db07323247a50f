//! Solomon-format VRPTW instances.
//!
//! ```text
//! NAME
//!
//! VEHICLE
//! NUMBER     CAPACITY
//!   25         200
//!
//! CUSTOMER
//! CUST NO.  XCOORD.  YCOORD.  DEMAND  READY TIME  DUE DATE  SERVICE TIME
//!     0       40       50       0         0        1236         0
//!     1       45       68      10       912         967        90
//! ```
//!
//! Row 0 is the depot; its demand and service time are forced to zero.
//! Travel costs are rounded Euclidean distances.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::ParseError;
use crate::model::{ProblemInstance, DEPOT};

const FIELDS: [&str; 7] = ["cust_no", "x", "y", "demand", "ready_time", "due_date", "service_time"];

pub fn read_instance(path: &Path) -> Result<ProblemInstance, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_instance(&text)
}

fn field<T: std::str::FromStr>(line: usize, name: &'static str, value: &str) -> Result<T, ParseError> {
    value.parse().map_err(|_| ParseError::Field {
        line,
        field: name,
        value: value.to_string(),
    })
}

pub fn parse_instance(text: &str) -> Result<ProblemInstance, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, name) = lines.next().ok_or(ParseError::MissingSection("VEHICLE"))?;
    let name = name.to_string();

    let mut capacity = None;
    let mut in_customers = false;
    let mut rows: Vec<[f64; 2]> = Vec::new();
    let mut ints: Vec<[i64; 4]> = Vec::new();
    let mut vehicle_pending = false;
    for (no, line) in lines {
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("VEHICLE") {
            vehicle_pending = true;
            continue;
        }
        if upper.starts_with("CUSTOMER") {
            in_customers = true;
            vehicle_pending = false;
            continue;
        }
        let starts_numeric = line.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+');
        if !starts_numeric {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if vehicle_pending {
            if parts.len() != 2 {
                return Err(ParseError::Syntax {
                    line: no,
                    message: format!("expected `NUMBER CAPACITY`, found {} fields", parts.len()),
                });
            }
            let _vehicles: i64 = field(no, "number", parts[0])?;
            capacity = Some(field::<i64>(no, "capacity", parts[1])?);
            vehicle_pending = false;
            continue;
        }
        if !in_customers {
            return Err(ParseError::Syntax {
                line: no,
                message: "data outside the VEHICLE and CUSTOMER sections".into(),
            });
        }
        if parts.len() != FIELDS.len() {
            return Err(ParseError::Syntax {
                line: no,
                message: format!("expected {} fields, found {}", FIELDS.len(), parts.len()),
            });
        }
        let id: usize = field(no, FIELDS[0], parts[0])?;
        if id != rows.len() {
            return Err(ParseError::Syntax {
                line: no,
                message: format!("customer number {id} out of sequence, expected {}", rows.len()),
            });
        }
        rows.push([field(no, FIELDS[1], parts[1])?, field(no, FIELDS[2], parts[2])?]);
        ints.push([
            field(no, FIELDS[3], parts[3])?,
            field(no, FIELDS[4], parts[4])?,
            field(no, FIELDS[5], parts[5])?,
            field(no, FIELDS[6], parts[6])?,
        ]);
    }
    let capacity = capacity.ok_or(ParseError::MissingSection("VEHICLE"))?;
    if !in_customers {
        return Err(ParseError::MissingSection("CUSTOMER"));
    }
    if rows.len() < 2 {
        return Err(ParseError::NoCustomers);
    }
    let coords = rows.iter().map(|r| (r[0], r[1])).collect();
    let mut demand: Vec<i64> = ints.iter().map(|r| r[0]).collect();
    let tw_start = ints.iter().map(|r| r[1]).collect();
    let tw_end = ints.iter().map(|r| r[2]).collect();
    let mut service: Vec<i64> = ints.iter().map(|r| r[3]).collect();
    demand[DEPOT] = 0;
    service[DEPOT] = 0;
    Ok(ProblemInstance::from_coords(
        name, coords, demand, tw_start, tw_end, service, capacity,
    )?)
}

/// Renders `instance` in the format read by [`parse_instance`].
pub fn format_instance(instance: &ProblemInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}\n\nVEHICLE\nNUMBER     CAPACITY", instance.name);
    let _ = writeln!(out, "{:>5}{:>13}\n", instance.customer_count(), instance.capacity);
    let _ = writeln!(
        out,
        "CUSTOMER\nCUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME\n"
    );
    for i in 0..instance.node_count() {
        let (x, y) = instance.coords[i];
        let _ = writeln!(
            out,
            "{:>5}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}",
            i, x, y, instance.demand[i], instance.tw_start[i], instance.tw_end[i], instance.service_time[i]
        );
    }
    out
}

pub fn write_instance(instance: &ProblemInstance, path: &Path) -> Result<(), ParseError> {
    std::fs::write(path, format_instance(instance)).map_err(|source| ParseError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ModelError;

    const TOY: &str = "TOY\n\nVEHICLE\nNUMBER     CAPACITY\n  3   10\n\nCUSTOMER\n\
CUST NO. XCOORD. YCOORD. DEMAND READY TIME DUE DATE SERVICE TIME\n\n\
0 0 0 5 0 100 7\n1 3 4 2 0 50 1\n2 6 0 3 10 60 1\n";

    #[test]
    fn depot_is_neutralized() {
        let inst = parse_instance(TOY).unwrap();
        assert_eq!(inst.demand, vec![0, 2, 3]);
        assert_eq!(inst.service_time, vec![0, 1, 1]);
        assert_eq!(inst.travel[0][1], 5);
        assert_eq!(inst.travel[1][2], 5);
        assert_eq!(inst.capacity, 10);
        assert_eq!(inst.name, "TOY");
    }

    #[test]
    fn bad_field_names_line_and_field() {
        let text = TOY.replace("1 3 4 2 0 50 1", "1 3 4 two 0 50 1");
        match parse_instance(&text).unwrap_err() {
            ParseError::Field { line, field, value } => {
                assert_eq!((line, field, value.as_str()), (11, "demand", "two"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn short_row_is_a_syntax_error() {
        let text = TOY.replace("2 6 0 3 10 60 1", "2 6 0 3 10 60");
        assert!(matches!(
            parse_instance(&text),
            Err(ParseError::Syntax { line: 12, .. })
        ));
    }

    #[test]
    fn empty_customer_section_is_rejected() {
        let text = "E\nVEHICLE\nNUMBER CAPACITY\n1 10\nCUSTOMER\nCUST NO.\n";
        assert!(matches!(parse_instance(text), Err(ParseError::NoCustomers)));
        let depot_only = format!("{text}0 0 0 0 0 10 0\n");
        assert!(matches!(parse_instance(&depot_only), Err(ParseError::NoCustomers)));
    }

    #[test]
    fn oversized_demand_is_a_validation_error() {
        let text = TOY.replace("2 6 0 3 10 60 1", "2 6 0 11 10 60 1");
        assert!(matches!(
            parse_instance(&text),
            Err(ParseError::Invalid(ModelError::DemandOutOfRange { node: 2, .. }))
        ));
    }

    #[test]
    fn format_round_trips() {
        let inst = parse_instance(TOY).unwrap();
        assert_eq!(parse_instance(&format_instance(&inst)).unwrap(), inst);
    }
}
