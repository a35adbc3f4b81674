//! Delimited-text datasets, prediction tables and histories.

use std::path::Path;

use latentgp::MfDataset;

use crate::error::CliError;

/// Column roles of a dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Roles {
    pub numeric: Vec<String>,
    /// Categorical columns and their level counts.
    pub categorical: Vec<(String, usize)>,
    pub source: Option<String>,
    pub calibration: Vec<String>,
    pub response: String,
}

/// Role flags as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct RoleArgs {
    pub response: String,
    pub source: Option<String>,
    pub qual_dict: Option<String>,
    pub calibration: Vec<String>,
    pub numeric: Option<Vec<String>>,
}

/// Parses `col:levels,col:levels`.
pub fn parse_qual_dict(s: &str) -> Result<Vec<(String, usize)>, CliError> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|tok| {
            let (name, levels) = tok
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("qual-dict entry '{tok}' is not of the form column:levels")))?;
            let n: usize = levels
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("qual-dict entry '{tok}' has an invalid level count")))?;
            if n == 0 {
                return Err(CliError::Usage(format!("qual-dict entry '{tok}' has no levels")));
            }
            Ok((name.trim().to_string(), n))
        })
        .collect()
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|tok| tok.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("invalid {what} value '{tok}'"))))
        .collect()
}

pub fn parse_names(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

impl Roles {
    /// Role-tagged column names, e.g. `x:r_w`, `t:grade:5`, `s:source`.
    pub fn tagged(&self) -> Vec<String> {
        let mut v: Vec<String> = self.numeric.iter().map(|c| format!("x:{c}")).collect();
        v.extend(self.categorical.iter().map(|(c, l)| format!("t:{c}:{l}")));
        v.extend(self.source.iter().map(|c| format!("s:{c}")));
        v.extend(self.calibration.iter().map(|c| format!("zeta:{c}")));
        v.push(format!("y:{}", self.response));
        v
    }

    pub fn from_tagged(tags: &[String]) -> Result<Self, CliError> {
        let mut r = Roles::default();
        for tag in tags {
            let bad = || CliError::Data(format!("unrecognized column tag '{tag}' in model file"));
            let (role, rest) = tag.split_once(':').ok_or_else(bad)?;
            match role {
                "x" => r.numeric.push(rest.into()),
                "t" => {
                    let (name, l) = rest.rsplit_once(':').ok_or_else(bad)?;
                    r.categorical.push((name.into(), l.parse().map_err(|_| bad())?));
                }
                "s" => r.source = Some(rest.into()),
                "zeta" => r.calibration.push(rest.into()),
                "y" => r.response = rest.into(),
                _ => return Err(bad()),
            }
        }
        Ok(r)
    }

    pub fn levels(&self) -> Vec<usize> {
        self.categorical.iter().map(|c| c.1).collect()
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_number(s: &str, col: &str, row: usize) -> Result<f64, CliError> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
        CliError::Data(format!("row {row}, column {col}: '{s}' is not a number (use '.' as decimal separator)"))
    })
}

fn parse_index(s: &str, col: &str, row: usize) -> Result<usize, CliError> {
    s.parse::<usize>()
        .map_err(|_| CliError::Data(format!("row {row}, column {col}: '{s}' is not a non-negative integer")))
}

/// Reads a dataset given explicit roles. Without `require_response` a
/// missing response column yields zeros.
pub fn read_with_roles(path: &Path, roles: &Roles, require_response: bool) -> Result<MfDataset, CliError> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let find = |name: &str| -> Result<usize, CliError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("column '{name}' not found in {}", path.display())))
    };
    let xi: Vec<usize> = roles.numeric.iter().map(|c| find(c)).collect::<Result<_, _>>()?;
    let ti: Vec<usize> = roles.categorical.iter().map(|(c, _)| find(c)).collect::<Result<_, _>>()?;
    let si = roles.source.as_deref().map(find).transpose()?;
    let zi: Vec<usize> = roles.calibration.iter().map(|c| find(c)).collect::<Result<_, _>>()?;
    let yi =
        if require_response { Some(find(&roles.response)?) } else { header.iter().position(|h| *h == roles.response) };
    let mut data = MfDataset::default();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let row = r + 2;
        let x = xi
            .iter()
            .zip(&roles.numeric)
            .map(|(i, c)| parse_number(&rec[*i], c, row))
            .collect::<Result<Vec<_>, _>>()?;
        let mut t = Vec::with_capacity(ti.len());
        for (i, (c, levels)) in ti.iter().zip(&roles.categorical) {
            let v = parse_index(&rec[*i], c, row)?;
            if v >= *levels {
                return Err(CliError::Data(format!(
                    "row {row}, column {c}: level {v} exceeds the {levels} declared levels"
                )));
            }
            t.push(v);
        }
        let s = match si {
            Some(i) => parse_index(&rec[i], roles.source.as_deref().unwrap_or(""), row)?,
            None => 0,
        };
        let cells: Vec<&str> = zi.iter().map(|i| &rec[*i]).collect();
        let zeta = if cells.is_empty() || cells.iter().all(|c| c.is_empty()) {
            None
        } else if cells.iter().any(|c| c.is_empty()) {
            return Err(CliError::Data(format!("row {row}: calibration columns are partially filled")));
        } else {
            Some(
                cells
                    .iter()
                    .zip(&roles.calibration)
                    .map(|(v, c)| parse_number(v, c, row))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        };
        let y = match yi {
            Some(i) => parse_number(&rec[i], &roles.response, row)?,
            None => 0.0,
        };
        data.push(x, t, s, zeta, y);
    }
    if data.is_empty() {
        return Err(CliError::Data(format!("{} has no data rows", path.display())));
    }
    Ok(data)
}

/// Reads a dataset resolving roles from flags; unassigned columns are
/// numeric unless `numeric` lists them explicitly.
pub fn read_dataset(path: &Path, args: &RoleArgs) -> Result<(MfDataset, Roles), CliError> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let categorical = match &args.qual_dict {
        Some(q) => parse_qual_dict(q)?,
        None => vec![],
    };
    let numeric = match &args.numeric {
        Some(n) => n.clone(),
        None => header
            .iter()
            .filter(|h| {
                **h != args.response
                    && args.source.as_deref() != Some(h.as_str())
                    && !categorical.iter().any(|(c, _)| c == *h)
                    && !args.calibration.contains(h)
            })
            .cloned()
            .collect(),
    };
    let roles = Roles {
        numeric,
        categorical,
        source: args.source.clone(),
        calibration: args.calibration.clone(),
        response: args.response.clone(),
    };
    let data = read_with_roles(path, &roles, true)?;
    Ok((data, roles))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes a dataset with the given roles.
pub fn write_dataset(path: &Path, data: &MfDataset, roles: &Roles) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header: Vec<String> = roles.numeric.clone();
    header.extend(roles.categorical.iter().map(|c| c.0.clone()));
    header.extend(roles.calibration.iter().cloned());
    header.extend(roles.source.iter().cloned());
    header.push(roles.response.clone());
    write_row(&mut w, &header, path)?;
    let inp = &data.inputs;
    for i in 0..data.len() {
        let mut row: Vec<String> = inp.x[i].iter().map(|v| fmt(*v)).collect();
        row.extend(inp.t[i].iter().map(|v| v.to_string()));
        match &inp.zeta[i] {
            Some(z) => row.extend(z.iter().map(|v| fmt(*v))),
            None => row.extend(roles.calibration.iter().map(|_| String::new())),
        }
        if roles.source.is_some() {
            row.push(inp.s[i].to_string());
        }
        row.push(fmt(data.y[i]));
        write_row(&mut w, &row, path)?;
    }
    flush(w, path)
}

pub fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_row<S: AsRef<[u8]>>(w: &mut csv::Writer<std::fs::File>, row: &[S], path: &Path) -> Result<(), CliError> {
    w.write_record(row).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Writes a two-column `mean,std` table.
pub fn write_predictions(path: &Path, mean: &[f64], std: &[f64]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    write_row(&mut w, &["mean", "std"], path)?;
    for (m, s) in mean.iter().zip(std) {
        write_row(&mut w, &[fmt(*m), fmt(*s)], path)?;
    }
    flush(w, path)
}

/// Reads named numeric columns.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| CliError::Usage(format!("column '{n}' not found in {}", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        for (k, i) in idx.iter().enumerate() {
            out[k].push(parse_number(&rec[*i], names[k], r + 2)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qual_dict_parsing() {
        assert_eq!(parse_qual_dict("a:3, b:2").unwrap(), vec![("a".to_string(), 3), ("b".to_string(), 2)]);
        let e = parse_qual_dict("a3").unwrap_err();
        assert!(e.to_string().contains("a3"));
        assert!(parse_qual_dict("a:x").is_err());
    }

    #[test]
    fn tags_round_trip() {
        let r = Roles {
            numeric: vec!["x1".into()],
            categorical: vec![("g".into(), 4)],
            source: Some("src".into()),
            calibration: vec!["E".into()],
            response: "y".into(),
        };
        assert_eq!(Roles::from_tagged(&r.tagged()).unwrap(), r);
    }

    #[test]
    fn comma_decimal_rejected() {
        assert!(parse_number("1,5", "x", 2).is_err());
        assert_eq!(parse_number("1.5", "x", 2).unwrap(), 1.5);
    }
}
