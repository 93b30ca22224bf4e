//! Terminal review of generated evaluation programs.

use std::io::{BufRead, Write};

use robotgpt::orchestrator::{Approver, ReviewDecision, ReviewHook};
use robotgpt::tasks::TaskName;

/// Shows the program with line numbers and asks approve/edit/reject.
/// An edit is read line by line until a line holding a single `.`.
pub struct InteractiveReview<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> InteractiveReview<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }

    fn read_line(&mut self) -> Option<String> {
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line.trim_end_matches(['\n', '\r']).to_string()),
        }
    }

    fn read_edit(&mut self) -> String {
        let _ = writeln!(self.output, "Enter the replacement program; finish with a line containing only '.'");
        let mut lines = Vec::new();
        while let Some(line) = self.read_line() {
            if line == "." {
                break;
            }
            lines.push(line);
        }
        lines.join("\n")
    }
}

pub fn numbered(source: &str) -> String {
    let width = source.lines().count().max(1).to_string().len();
    source.lines().enumerate().map(|(i, l)| format!("{:>width$} | {l}\n", i + 1)).collect()
}

impl<R: BufRead, W: Write> ReviewHook for InteractiveReview<R, W> {
    fn review(&mut self, task: TaskName, source: &str) -> ReviewDecision {
        let _ = write!(self.output, "Evaluation program for {task}:\n{}", numbered(source));
        loop {
            let _ = write!(self.output, "[a]pprove, [e]dit or [r]eject? ");
            let _ = self.output.flush();
            let Some(answer) = self.read_line() else {
                return ReviewDecision::Reject;
            };
            match answer.trim().to_ascii_lowercase().as_str() {
                "a" | "approve" => return ReviewDecision::Approve,
                "r" | "reject" => return ReviewDecision::Reject,
                "e" | "edit" => return ReviewDecision::Edit(self.read_edit()),
                _ => {}
            }
        }
    }

    fn approver(&self) -> Approver {
        Approver::Human
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(input: &str) -> (ReviewDecision, String) {
        let mut out = Vec::new();
        let d = InteractiveReview::new(input.as_bytes(), &mut out).review(TaskName::MoveCube, "x = 1\nreturn x == 1");
        (d, String::from_utf8(out).unwrap())
    }

    #[test]
    fn shows_line_numbers() {
        let (d, shown) = run("a\n");
        assert_eq!(d, ReviewDecision::Approve);
        assert!(shown.contains("1 | x = 1\n2 | return x == 1\n"));
    }

    #[test]
    fn reprompts_then_edits() {
        let (d, _) = run("maybe\ne\nreturn True\n  \n.\n");
        assert_eq!(d, ReviewDecision::Edit("return True\n  ".into()));
    }

    #[test]
    fn reject_and_eof() {
        assert_eq!(run("r\n").0, ReviewDecision::Reject);
        assert_eq!(run("").0, ReviewDecision::Reject);
    }

    #[test]
    fn width_follows_line_count() {
        let src = (1..=10).map(|i| format!("x{i} = {i}")).collect::<Vec<_>>().join("\n");
        assert!(numbered(&src).starts_with(" 1 | x1 = 1\n"));
        assert!(numbered(&src).ends_with("10 | x10 = 10\n"));
    }
}
