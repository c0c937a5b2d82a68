//! Workbook data model: named sheets holding sparse raw cell text, A1-style
//! addresses, range specs and grid snapshots.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_COL: u16 = 256;
pub const MAX_ROW: u32 = 65536;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("malformed cell address `{0}`")]
    MalformedAddress(String),
    #[error("column `{0}` is beyond IV")]
    ColumnOutOfRange(String),
    #[error("row {0} is outside 1..=65536")]
    RowOutOfRange(u64),
    #[error("unknown sheet `{0}`")]
    UnknownSheet(String),
    #[error("invalid sheet name `{0}` (letters, digits and `_` only, starting with a letter)")]
    InvalidSheetName(String),
    #[error("duplicate sheet name `{0}`")]
    DuplicateSheet(String),
    #[error("a workbook needs at least one sheet")]
    NoSheets,
    #[error("active sheet index {0} is out of range")]
    BadActiveSheet(usize),
    #[error("snapshot does not match the workbook's sheets")]
    SnapshotMismatch,
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invalid workbook JSON: {0}")]
    Json(String),
    #[error("invalid CSV: {0}")]
    Csv(String),
}

/// A cell position. The sheet is always resolved to an index into the
/// owning workbook's sheet list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddr {
    pub sheet: usize,
    pub col: u16,
    pub row: u32,
}

impl CellAddr {
    pub fn new(sheet: usize, col: u16, row: u32) -> Self {
        debug_assert!((1..=MAX_COL).contains(&col) && (1..=MAX_ROW).contains(&row));
        CellAddr { sheet, col, row }
    }

    /// Column letters plus row, without any sheet qualifier ("B12").
    pub fn local_name(&self) -> String {
        format!("{}{}", col_letters(self.col), self.row)
    }
}

/// Encodes a 1-based column number as letters (1 → A, 27 → AA, 256 → IV).
pub fn col_letters(mut col: u16) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Decodes column letters (case-insensitive) into a 1-based column number.
pub fn decode_col(letters: &str) -> Result<u16, GridError> {
    if letters.is_empty() || !letters.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(GridError::MalformedAddress(letters.to_string()));
    }
    let mut value: u32 = 0;
    for c in letters.chars() {
        value = value * 26 + (c.to_ascii_uppercase() as u32 - 'A' as u32 + 1);
        if value > MAX_COL as u32 {
            return Err(GridError::ColumnOutOfRange(letters.to_ascii_uppercase()));
        }
    }
    Ok(value as u16)
}

/// Splits an unqualified address like "ab12" into a (col, row) pair.
pub fn parse_local_addr(text: &str) -> Result<(u16, u32), GridError> {
    let split = text
        .find(|c: char| !c.is_ascii_alphabetic())
        .ok_or_else(|| GridError::MalformedAddress(text.to_string()))?;
    let (letters, digits) = text.split_at(split);
    if letters.is_empty() || digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(GridError::MalformedAddress(text.to_string()));
    }
    let col = decode_col(letters)?;
    let row: u64 = digits
        .parse()
        .map_err(|_| GridError::MalformedAddress(text.to_string()))?;
    if row == 0 || row > MAX_ROW as u64 {
        return Err(GridError::RowOutOfRange(row));
    }
    Ok((col, row as u32))
}

/// Sheet names are restricted to identifier characters so that they can sit
/// in front of `!` without quoting.
pub fn valid_sheet_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses "A1" or "Sheet2!B1" against `wb`; unqualified addresses bind to
/// `current`.
pub fn parse_cell_addr(text: &str, wb: &Workbook, current: usize) -> Result<CellAddr, GridError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(GridError::MalformedAddress(String::new()));
    }
    let (sheet, local) = match text.split_once('!') {
        Some((name, rest)) => {
            let name = name.trim();
            let idx = wb
                .sheet_index(name)
                .ok_or_else(|| GridError::UnknownSheet(name.to_string()))?;
            (idx, rest.trim())
        }
        None => (current, text),
    };
    let (col, row) = parse_local_addr(local)?;
    Ok(CellAddr { sheet, col, row })
}

/// A range argument as written in a formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RangeSpec {
    Single(CellAddr),
    Rect { top_left: CellAddr, bottom_right: CellAddr },
    Enumeration(Vec<RangeSpec>),
}

impl RangeSpec {
    /// Builds a rectangle from two corners in any order. Both corners must be
    /// on the same sheet.
    pub fn rect(a: CellAddr, b: CellAddr) -> Option<RangeSpec> {
        if a.sheet != b.sheet {
            return None;
        }
        Some(RangeSpec::Rect {
            top_left: CellAddr::new(a.sheet, a.col.min(b.col), a.row.min(b.row)),
            bottom_right: CellAddr::new(a.sheet, a.col.max(b.col), a.row.max(b.row)),
        })
    }

    pub fn is_rect(&self) -> bool {
        matches!(self, RangeSpec::Rect { .. })
    }

    /// Number of cells the spec names, counting repeats in enumerations.
    pub fn cell_count(&self) -> usize {
        match self {
            RangeSpec::Single(_) => 1,
            RangeSpec::Rect { top_left, bottom_right } => {
                (bottom_right.col - top_left.col + 1) as usize
                    * (bottom_right.row - top_left.row + 1) as usize
            }
            RangeSpec::Enumeration(items) => items.iter().map(RangeSpec::cell_count).sum(),
        }
    }

    /// Renders the spec in formula syntax relative to `current`.
    pub fn render(&self, wb: &Workbook, current: usize) -> String {
        match self {
            RangeSpec::Single(a) => wb.format_addr(*a, current),
            RangeSpec::Rect { top_left, bottom_right } => format!(
                "{}:{}",
                wb.format_addr(*top_left, current),
                bottom_right.local_name()
            ),
            RangeSpec::Enumeration(items) => {
                let parts: Vec<String> = items.iter().map(|i| i.render(wb, current)).collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sheet {
    pub name: String,
    /// Keyed by (row, col) so iteration is row-major.
    cells: BTreeMap<(u32, u16), String>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Sheet { name: name.into(), cells: BTreeMap::new() }
    }

    pub fn get(&self, col: u16, row: u32) -> Option<&str> {
        self.cells.get(&(row, col)).map(String::as_str)
    }

    /// Stores `text`; blank text clears the cell.
    pub fn set(&mut self, col: u16, row: u32, text: impl Into<String>) {
        let text = text.into();
        if text.trim().is_empty() {
            self.cells.remove(&(row, col));
        } else {
            self.cells.insert((row, col), text);
        }
    }

    pub fn clear(&mut self, col: u16, row: u32) {
        self.cells.remove(&(row, col));
    }

    /// Non-empty cells in row-major order as (col, row, text).
    pub fn cells(&self) -> impl Iterator<Item = (u16, u32, &str)> {
        self.cells.iter().map(|(&(row, col), text)| (col, row, text.as_str()))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workbook {
    sheets: Vec<Sheet>,
    active: usize,
}

impl Default for Workbook {
    fn default() -> Self {
        Workbook { sheets: vec![Sheet::new("Sheet1")], active: 0 }
    }
}

impl Workbook {
    pub fn new(sheets: Vec<Sheet>, active: usize) -> Result<Self, GridError> {
        if sheets.is_empty() {
            return Err(GridError::NoSheets);
        }
        if active >= sheets.len() {
            return Err(GridError::BadActiveSheet(active));
        }
        for (i, s) in sheets.iter().enumerate() {
            if !valid_sheet_name(&s.name) {
                return Err(GridError::InvalidSheetName(s.name.clone()));
            }
            if sheets[..i].iter().any(|o| o.name.eq_ignore_ascii_case(&s.name)) {
                return Err(GridError::DuplicateSheet(s.name.clone()));
            }
        }
        Ok(Workbook { sheets, active })
    }

    /// A single-sheet workbook named "Sheet1" filled from (address, text)
    /// pairs. Panics on a malformed address; intended for fixtures and tests.
    pub fn from_cells<'a>(cells: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut wb = Workbook::default();
        for (addr, text) in cells {
            wb.set_text(addr, text).expect("valid fixture address");
        }
        wb
    }

    pub fn sheets(&self) -> &[Sheet] {
        &self.sheets
    }

    pub fn sheet(&self, idx: usize) -> &Sheet {
        &self.sheets[idx]
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn sheet_index(&self, name: &str) -> Option<usize> {
        self.sheets.iter().position(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn add_sheet(&mut self, name: impl Into<String>) -> Result<usize, GridError> {
        let name = name.into();
        if !valid_sheet_name(&name) {
            return Err(GridError::InvalidSheetName(name));
        }
        if self.sheet_index(&name).is_some() {
            return Err(GridError::DuplicateSheet(name));
        }
        self.sheets.push(Sheet::new(name));
        Ok(self.sheets.len() - 1)
    }

    pub fn get(&self, addr: CellAddr) -> Option<&str> {
        self.sheets.get(addr.sheet).and_then(|s| s.get(addr.col, addr.row))
    }

    pub fn set(&mut self, addr: CellAddr, text: impl Into<String>) {
        self.sheets[addr.sheet].set(addr.col, addr.row, text);
    }

    /// Sets a cell by textual address (relative to the active sheet).
    pub fn set_text(&mut self, addr: &str, text: &str) -> Result<CellAddr, GridError> {
        let a = parse_cell_addr(addr, self, self.active)?;
        self.set(a, text);
        Ok(a)
    }

    /// "A1" on `current`, "Sheet2!A1" elsewhere.
    pub fn format_addr(&self, addr: CellAddr, current: usize) -> String {
        if addr.sheet == current {
            addr.local_name()
        } else {
            format!("{}!{}", self.sheets[addr.sheet].name, addr.local_name())
        }
    }

    /// Always sheet-qualified; used in diagnostics.
    pub fn qualified_addr(&self, addr: CellAddr) -> String {
        format!("{}!{}", self.sheets[addr.sheet].name, addr.local_name())
    }

    /// Identifier for the CLP variable bound to `addr`: "A1" on `current`,
    /// "Sheet2A1" on another sheet. A `_` separates the sheet name from the
    /// address when the name does not end in a digit ("Data_A1"), and the
    /// first letter is uppercased, so distinct cells never share a name.
    pub fn var_name(&self, addr: CellAddr, current: usize) -> String {
        if addr.sheet == current {
            return addr.local_name();
        }
        let name = &self.sheets[addr.sheet].name;
        let mut out = String::with_capacity(name.len() + 8);
        let mut chars = name.chars();
        if let Some(first) = chars.next() {
            out.push(first.to_ascii_uppercase());
        }
        out.extend(chars);
        if !name.ends_with(|c: char| c.is_ascii_digit()) {
            out.push('_');
        }
        out.push_str(&addr.local_name());
        out
    }

    pub fn snapshot(&self) -> GridSnapshot {
        GridSnapshot { sheets: self.sheets.clone() }
    }

    /// Replaces every cell with the snapshot's contents. The snapshot must
    /// come from a workbook with the same sheet names in the same order.
    pub fn restore(&mut self, snap: &GridSnapshot) -> Result<(), GridError> {
        let same = snap.sheets.len() == self.sheets.len()
            && snap.sheets.iter().zip(&self.sheets).all(|(a, b)| a.name == b.name);
        if !same {
            return Err(GridError::SnapshotMismatch);
        }
        for (dst, src) in self.sheets.iter_mut().zip(&snap.sheets) {
            dst.cells.clone_from(&src.cells);
        }
        Ok(())
    }

    pub fn to_json(&self) -> WorkbookJson {
        WorkbookJson {
            sheets: self
                .sheets
                .iter()
                .map(|s| SheetJson {
                    name: s.name.clone(),
                    cells: s
                        .cells()
                        .map(|(c, r, t)| (format!("{}{}", col_letters(c), r), t.to_string()))
                        .collect(),
                })
                .collect(),
            active: self.active,
        }
    }

    pub fn from_json(doc: WorkbookJson) -> Result<Self, GridError> {
        let mut sheets = Vec::with_capacity(doc.sheets.len());
        for sj in doc.sheets {
            let mut sheet = Sheet::new(sj.name);
            for (addr, text) in sj.cells {
                let (col, row) = parse_local_addr(addr.trim())?;
                sheet.set(col, row, text);
            }
            sheets.push(sheet);
        }
        Workbook::new(sheets, doc.active)
    }

    pub fn from_json_str(text: &str) -> Result<Self, GridError> {
        let doc: WorkbookJson =
            serde_json::from_str(text).map_err(|e| GridError::Json(e.to_string()))?;
        Workbook::from_json(doc)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("workbook serializes")
    }

    pub fn load(path: &Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GridError::Io(format!("{}: {e}", path.display())))?;
        Workbook::from_json_str(&text)
    }

    /// Reads one sheet per `*.csv` file in `dir` (sorted by file name; the
    /// file stem becomes the sheet name). The first sheet is active.
    pub fn load_csv_dir(dir: &Path) -> Result<Self, GridError> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| GridError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        paths.sort();
        let mut sheets = Vec::new();
        for p in paths {
            let name = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let file = std::fs::File::open(&p)
                .map_err(|e| GridError::Io(format!("{}: {e}", p.display())))?;
            sheets.push(sheet_from_csv(name, file)?);
        }
        Workbook::new(sheets, 0)
    }
}

/// Builds a sheet from CSV text: row-major, cell text verbatim, empty fields
/// are empty cells.
pub fn sheet_from_csv(name: String, reader: impl std::io::Read) -> Result<Sheet, GridError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut sheet = Sheet::new(name);
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| GridError::Csv(e.to_string()))?;
        for (c, field) in rec.iter().enumerate() {
            if c >= MAX_COL as usize || r >= MAX_ROW as usize {
                return Err(GridError::Csv(format!("cell at row {}, column {} is off the grid", r + 1, c + 1)));
            }
            sheet.set(c as u16 + 1, r as u32 + 1, field);
        }
    }
    Ok(sheet)
}

/// Wire form of a workbook file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkbookJson {
    pub sheets: Vec<SheetJson>,
    #[serde(default)]
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetJson {
    pub name: String,
    #[serde(default)]
    pub cells: IndexMap<String, String>,
}

/// Copy of every cell's raw text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSnapshot {
    sheets: Vec<Sheet>,
}

/// Strips formula punctuation: surrounding whitespace and one leading `=` or `@`.
pub fn clean_cell_text(text: &str) -> &str {
    let t = text.trim();
    t.strip_prefix('=')
        .or_else(|| t.strip_prefix('@'))
        .unwrap_or(t)
        .trim()
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", col_letters(self.col), self.row)
    }
}
