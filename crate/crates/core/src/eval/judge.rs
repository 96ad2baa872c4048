use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::assembly::{normalize_metric_name, rank_by_primary, render_markdown, Direction, LeaderboardTable};
use crate::intel::{billed, Billed};
use crate::llm::{parse_json_payload, Gateway};
use crate::prompts;

const SCORE_REMINDER: &str =
    "\n\nYour previous reply was not usable. Reply with only {\"score\": <integer 1-5>, \"rationale\": \"...\"}.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureJudgment {
    pub score: u8,
    pub rationale: String,
}

fn board_prompt(board: &LeaderboardTable, variant: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(tag) = variant {
        out.push_str(&format!("Iteration {tag}\n\n"));
    }
    out.push_str(&format!(
        "Leaderboard for dataset {}:\n\n{}",
        board.dataset,
        render_markdown(board)
    ));
    out
}

fn read_score(text: &str) -> Result<StructureJudgment, String> {
    let obj = parse_json_payload(text, &["score"]).map_err(|e| e.to_string())?;
    let score = match &obj["score"] {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or_else(|| format!("score {} is not an integer", obj["score"]))?;
    if !(1..=5).contains(&score) {
        return Err(format!("score {score} is outside 1..5"));
    }
    let rationale = obj
        .get("rationale")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Ok(StructureJudgment {
        score: score as u8,
        rationale,
    })
}

/// Rates a board's structure on the 1 to 5 rubric. An unusable reply is
/// re-asked once; a second one is an error, never a default.
pub fn score_structure(
    board: &LeaderboardTable,
    gateway: &Gateway,
    variant: Option<&str>,
) -> Billed<Result<StructureJudgment, EvalError>> {
    billed(|usage| {
        let mut request = gateway.request(prompts::STRUCTURE_JUDGE, board_prompt(board, variant));
        let mut problem = String::new();
        for attempt in 0..2 {
            let (text, entry) = gateway.complete(&request)?;
            usage.push(entry);
            match read_score(&text) {
                Ok(j) => return Ok(j),
                Err(e) => {
                    log::warn!(
                        "{}: structure judgment attempt {} unusable: {e}",
                        board.dataset,
                        attempt + 1
                    );
                    problem = e;
                    request = request.with_appended(SCORE_REMINDER);
                }
            }
        }
        Err(EvalError::UnparseableScore(problem))
    })
}

/// The only edits a judge may make. None of them changes a result value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    MergeColumns { keep: String, drop: String },
    RenameColumn { from: String, to: String },
    DropRow { title: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub edit: Value,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub board: LeaderboardTable,
    pub applied: Vec<Edit>,
    pub rejected: Vec<Rejection>,
}

fn merge(board: &mut LeaderboardTable, keep: &str, drop: &str) -> Result<(), String> {
    if keep == drop {
        return Err("cannot merge a column into itself".into());
    }
    let k = board
        .columns
        .iter()
        .position(|c| c.canonical_name == keep)
        .ok_or(format!("no column {keep}"))?;
    let d = board
        .columns
        .iter()
        .position(|c| c.canonical_name == drop)
        .ok_or(format!("no column {drop}"))?;
    let (kc, dc) = (&board.columns[k], &board.columns[d]);
    if kc.unit != dc.unit {
        return Err(format!("{keep} and {drop} use different units"));
    }
    let direction = match (kc.direction, dc.direction) {
        (a, b) if a == b => a,
        (Direction::Unknown, b) => b,
        (a, Direction::Unknown) => a,
        _ => return Err(format!("{keep} and {drop} rank in opposite directions")),
    };
    for r in &board.rows {
        if let (Some(a), Some(b)) = (r.values.get(keep), r.values.get(drop)) {
            if a.value() != b.value() {
                return Err(format!("{:?} reports different values for {keep} and {drop}", r.title));
            }
        }
    }
    for r in &mut board.rows {
        if let Some(v) = r.values.shift_remove(drop) {
            r.values.entry(keep.to_string()).or_insert(v);
        }
    }
    let dropped = board.columns.remove(d);
    let kc = board
        .columns
        .iter_mut()
        .find(|c| c.canonical_name == keep)
        .expect("kept column exists");
    kc.aliases.extend(dropped.aliases);
    kc.direction = direction;
    Ok(())
}

fn rename(board: &mut LeaderboardTable, from: &str, to: &str) -> Result<(), String> {
    let to = to.split_whitespace().collect::<Vec<_>>().join(" ");
    if to.is_empty() {
        return Err("empty column name".into());
    }
    let i = board
        .columns
        .iter()
        .position(|c| c.canonical_name == from)
        .ok_or(format!("no column {from}"))?;
    if board
        .columns
        .iter()
        .enumerate()
        .any(|(j, c)| j != i && c.canonical_name == to)
    {
        return Err(format!("column {to} already exists"));
    }
    let key = normalize_metric_name(&to);
    let others: BTreeSet<&String> = board
        .columns
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .flat_map(|(_, c)| &c.aliases)
        .collect();
    if others.contains(&key) {
        return Err(format!("{to} names another column's metric"));
    }
    let col = &mut board.columns[i];
    col.canonical_name = to.clone();
    if !key.is_empty() {
        col.aliases.insert(key);
    }
    for r in &mut board.rows {
        r.values = std::mem::take(&mut r.values)
            .into_iter()
            .map(|(k, v)| if k == from { (to.clone(), v) } else { (k, v) })
            .collect::<IndexMap<_, _>>();
    }
    if board.primary_metric.as_deref() == Some(from) {
        board.primary_metric = Some(to);
    }
    Ok(())
}

fn drop_row(board: &mut LeaderboardTable, title: &str) -> Result<(), String> {
    let i = board
        .rows
        .iter()
        .position(|r| r.title == title)
        .ok_or(format!("no row {title:?}"))?;
    if !board.rows[i].values.is_empty() {
        return Err(format!("{title:?} carries results"));
    }
    board.rows.remove(i);
    Ok(())
}

/// Applies one edit to a copy of `board`, re-ranks, and keeps the copy only
/// if every board invariant still holds.
pub fn apply_edit(board: &LeaderboardTable, edit: &Edit) -> Result<LeaderboardTable, String> {
    let mut next = board.clone();
    match edit {
        Edit::MergeColumns { keep, drop } => merge(&mut next, keep, drop)?,
        Edit::RenameColumn { from, to } => rename(&mut next, from, to)?,
        Edit::DropRow { title } => drop_row(&mut next, title)?,
    }
    let next = rank_by_primary(next);
    next.validate()?;
    Ok(next)
}

/// Applies raw edit objects in order. Unknown or unsafe edits are rejected
/// and logged; the rest take effect.
pub fn apply_edits(board: LeaderboardTable, edits: &[Value]) -> Refinement {
    let mut out = Refinement {
        board,
        applied: Vec::new(),
        rejected: Vec::new(),
    };
    for raw in edits {
        let outcome = serde_json::from_value::<Edit>(raw.clone())
            .map_err(|e| format!("unsupported edit: {e}"))
            .and_then(|edit| apply_edit(&out.board, &edit).map(|b| (edit, b)));
        match outcome {
            Ok((edit, b)) => {
                out.board = b;
                out.applied.push(edit);
            }
            Err(reason) => {
                log::warn!("{}: rejected edit {raw}: {reason}", out.board.dataset);
                out.rejected.push(Rejection {
                    edit: raw.clone(),
                    reason,
                });
            }
        }
    }
    out
}

/// Asks the judge for readability edits and applies the safe ones.
pub fn refine_board(
    board: LeaderboardTable,
    gateway: &Gateway,
    variant: Option<&str>,
) -> Billed<Result<Refinement, EvalError>> {
    billed(|usage| {
        let request = gateway.request(prompts::REFINE, board_prompt(&board, variant));
        let (reply, entries) = gateway.complete_json(&request, &["edits"]);
        usage.extend(entries);
        let reply = reply?;
        let edits = reply["edits"]
            .as_array()
            .ok_or_else(|| EvalError::BadReply(format!("edits is {}, not a list", reply["edits"])))?;
        Ok(apply_edits(board, edits))
    })
}
