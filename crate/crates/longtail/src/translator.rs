//! Translation through an external command.
//!
//! The command runs under `sh -c` once per batch and direction, with the
//! source and target codes in `RTT_SRC` and `RTT_TGT`. It reads one segment
//! per line on stdin and must print exactly one line per input line.

use std::io::Write;
use std::process::{Command, Stdio};

use longtail_core::metrics::{Translator, TranslatorError};

pub struct CommandTranslator {
    pub command: String,
}

impl CommandTranslator {
    pub fn new(command: impl Into<String>) -> Self {
        CommandTranslator {
            command: command.into(),
        }
    }

    fn run(
        &self,
        texts: &[&str],
        source: &str,
        target: &str,
    ) -> Result<Vec<String>, TranslatorError> {
        let err = |m: String| TranslatorError(m);
        if texts.iter().any(|t| t.contains('\n')) {
            return Err(err("segment contains a newline".into()));
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .env("RTT_SRC", source)
            .env("RTT_TGT", target)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| err(format!("spawn {:?}: {e}", self.command)))?;
        let mut input = String::new();
        for t in texts {
            input.push_str(t);
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        // Feed stdin from a thread so a chatty child cannot deadlock us.
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let output = child.wait_with_output().map_err(|e| err(e.to_string()))?;
        let _ = writer.join();
        if !output.status.success() {
            return Err(err(format!(
                "{:?} exited with {}",
                self.command, output.status
            )));
        }
        let text =
            String::from_utf8(output.stdout).map_err(|_| err("output is not UTF-8".into()))?;
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        if lines.len() != texts.len() {
            return Err(err(format!(
                "expected {} output lines, got {}",
                texts.len(),
                lines.len()
            )));
        }
        Ok(lines)
    }
}

impl Translator for CommandTranslator {
    fn translate(
        &mut self,
        text: &str,
        source: &str,
        target: &str,
    ) -> Result<String, TranslatorError> {
        self.run(&[text], source, target).map(|mut v| v.remove(0))
    }

    fn translate_batch(
        &mut self,
        texts: &[&str],
        source: &str,
        target: &str,
    ) -> Vec<Result<String, TranslatorError>> {
        if texts.is_empty() {
            return Vec::new();
        }
        match self.run(texts, source, target) {
            Ok(lines) => lines.into_iter().map(Ok).collect(),
            Err(e) => texts.iter().map(|_| Err(e.clone())).collect(),
        }
    }
}
