//! Child-process execution with a wall-clock limit.
//!
//! Each run gets a cleared environment, the candidate's private working
//! directory, piped stdin/stdout, a CPU rlimit slightly above the wall limit,
//! and its own process group so a timeout kills every descendant.

use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

const MAX_CAPTURE: u64 = 64 << 20;

#[derive(Debug)]
pub(crate) enum Outcome {
    Exited { status: ExitStatus, stdout: Vec<u8>, truncated: bool },
    TimedOut,
}

#[derive(Debug)]
pub(crate) struct RunResult {
    pub outcome: Outcome,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub(crate) struct Invocation {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub workdir: PathBuf,
    pub timeout: Duration,
}

fn base_command(inv: &Invocation) -> Command {
    let mut cmd = Command::new(&inv.program);
    cmd.args(&inv.args)
        .current_dir(&inv.workdir)
        .env_clear()
        .env("PATH", "/usr/local/bin:/usr/bin:/bin")
        .env("HOME", &inv.workdir)
        .env("LANG", "C.UTF-8")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONHASHSEED", "0");
    let cpu_secs = inv.timeout.as_secs() + 2;
    // SAFETY: only async-signal-safe libc calls between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            libc::setpgid(0, 0);
            let core = libc::rlimit { rlim_cur: 0, rlim_max: 0 };
            libc::setrlimit(libc::RLIMIT_CORE, &core);
            let cpu = libc::rlimit { rlim_cur: cpu_secs, rlim_max: cpu_secs + 1 };
            libc::setrlimit(libc::RLIMIT_CPU, &cpu);
            Ok(())
        });
    }
    cmd
}

/// Runs the program once. `Err` means the process could not be launched at
/// all, which is an environment problem rather than a candidate failure.
pub(crate) fn run_once(inv: &Invocation, stdin_bytes: &[u8]) -> std::io::Result<RunResult> {
    let mut cmd = base_command(inv);
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null());

    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pid = child.id() as libc::pid_t;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = stdin_bytes.to_vec();
    let writer = thread::spawn(move || {
        // A program that exits without reading its input closes the pipe.
        let _ = stdin.write_all(&input);
    });
    let stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let mut limited = stdout.take(MAX_CAPTURE + 1);
        let _ = limited.read_to_end(&mut buf);
        let truncated = buf.len() as u64 > MAX_CAPTURE;
        buf.truncate(MAX_CAPTURE as usize);
        // Drain so the child never blocks on a full pipe.
        let mut rest = limited.into_inner();
        let _ = std::io::copy(&mut rest, &mut std::io::sink());
        (buf, truncated)
    });

    let waited = child.wait_timeout(inv.timeout)?;
    let elapsed = start.elapsed();
    let outcome = match waited {
        Some(status) => {
            let _ = writer.join();
            let (stdout, truncated) = reader.join().unwrap_or_default();
            Outcome::Exited { status, stdout, truncated }
        }
        None => {
            // SAFETY: plain signal delivery to the child's own process group.
            unsafe {
                libc::killpg(pid, libc::SIGKILL);
            }
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            let _ = reader.join();
            Outcome::TimedOut
        }
    };
    Ok(RunResult { outcome, elapsed })
}

/// Runs a build step (compiler) and reports success plus captured stderr.
pub(crate) fn run_build(inv: &Invocation) -> std::io::Result<(bool, String)> {
    let mut cmd = base_command(inv);
    cmd.stdin(Stdio::null()).stdout(Stdio::null()).stderr(Stdio::piped());
    let mut child = cmd.spawn()?;
    let pid = child.id() as libc::pid_t;
    let mut stderr = child.stderr.take().expect("piped stderr");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    match child.wait_timeout(inv.timeout)? {
        Some(status) => Ok((status.success(), reader.join().unwrap_or_default())),
        None => {
            // SAFETY: see run_once.
            unsafe {
                libc::killpg(pid, libc::SIGKILL);
            }
            let _ = child.wait();
            let _ = reader.join();
            Ok((false, "build timed out".to_string()))
        }
    }
}

pub(crate) fn resolve_program(name: &str) -> PathBuf {
    let path = Path::new(name);
    if path.components().count() > 1 {
        return path.to_path_buf();
    }
    let search = std::env::var_os("PATH").unwrap_or_default();
    std::env::split_paths(&search)
        .map(|dir| dir.join(name))
        .find(|candidate| candidate.is_file())
        .unwrap_or_else(|| path.to_path_buf())
}
