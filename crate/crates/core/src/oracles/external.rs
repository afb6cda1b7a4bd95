use std::io::{ErrorKind, Read, Write};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::Oracle;
use crate::acquisition::Direction;
use crate::error::{Error, Result};
use crate::qscore::{Bounds, QSPoint};

/// Runs `sh -c command` per evaluation: one CSV row (x raw, then o) on
/// stdin, one decimal number expected on stdout.
pub struct ExecOracle {
    pub command: String,
    pub bounds: Bounds,
    pub direction: Direction,
    pub timeout: Duration,
    /// Allow concurrent evaluations.
    pub parallel_safe: bool,
    lock: Mutex<()>,
}

impl ExecOracle {
    pub fn new(command: impl Into<String>, bounds: Bounds, direction: Direction, timeout: Duration) -> Self {
        ExecOracle { command: command.into(), bounds, direction, timeout, parallel_safe: false, lock: Mutex::new(()) }
    }

    fn row(w: &QSPoint) -> String {
        let mut f: Vec<String> = w.x.iter().map(|v| v.to_string()).collect();
        f.extend(w.o.iter().map(|v| v.to_string()));
        f.join(",") + "\n"
    }

    fn run(&self, row: &str) -> Result<f64> {
        let fail = |msg: String| Error::Oracle(format!("{msg} (input row: {})", row.trim_end()));
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        if let Some(mut stdin) = child.stdin.take() {
            if let Err(e) = stdin.write_all(row.as_bytes()) {
                if e.kind() != ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out = thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let err = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let start = Instant::now();
        let status = loop {
            if let Some(st) = child.try_wait()? {
                break st;
            }
            if start.elapsed() > self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(fail(format!("timed out after {:?}", self.timeout)));
            }
            thread::sleep(Duration::from_millis(2));
        };
        let text = out.join().map_err(|_| fail("stdout reader panicked".into()))??;
        let errtext = err.join().unwrap_or_default();
        if !status.success() {
            return Err(fail(format!("exited with {status}: {}", errtext.trim())));
        }
        let v: f64 = text.trim().parse().map_err(|_| fail(format!("non-numeric output {:?}", text.trim())))?;
        if !v.is_finite() {
            return Err(fail(format!("non-finite output {v}")));
        }
        Ok(v)
    }
}

impl Oracle for ExecOracle {
    fn name(&self) -> String {
        format!("exec:{}", self.command)
    }
    fn k(&self) -> usize {
        self.bounds.k()
    }
    fn bounds(&self) -> Bounds {
        self.bounds.clone()
    }
    fn direction(&self) -> Direction {
        self.direction
    }
    fn is_pure(&self) -> bool {
        false
    }
    fn evaluate(&self, w: &QSPoint) -> Result<f64> {
        let row = Self::row(w);
        if self.parallel_safe {
            self.run(&row)
        } else {
            let _g = self.lock.lock().unwrap_or_else(|e| e.into_inner());
            self.run(&row)
        }
    }
}
