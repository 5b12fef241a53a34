//! Toy problem set, a scripted chat-completion endpoint and CLI helpers
//! shared by the CLI integration tests and the acceptance target.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

/// One toy problem with programs at four quality tiers.
pub struct Toy {
    pub id: &'static str,
    pub slow: &'static str,
    /// Correct, but no faster than about half the slow runtime.
    pub medium: &'static str,
    pub fast: &'static str,
    pub wrong: [&'static str; 2],
    pub crash: &'static str,
    pub public: &'static [(&'static str, &'static str)],
    pub private: &'static [(&'static str, &'static str)],
}

pub const TOYS: &[Toy] = &[
    Toy {
        id: "pair_sum",
        slow: "n = int(input())\ntotal = 0\nfor i in range(n):\n    for j in range(n):\n        if i < j:\n            total += i + j\nprint(total)\n",
        medium: "n = int(input())\ntotal = 0\nfor i in range(n):\n    for j in range(i + 1, n):\n        total += i + j\nprint(total)\n",
        fast: "n = int(input())\nprint((n - 1) * n * (n - 1) // 2)\n",
        wrong: [
            "n = int(input())\nprint(n * (n - 1) // 2)\n",
            "n = int(input())\nprint((n - 1) * n * n // 2)\n",
        ],
        crash: "n = int(input())\nprint(pair_total(n))\n",
        public: &[("1", "1500\n")],
        private: &[("1", "1400\n"), ("2", "1600\n")],
    },
    Toy {
        id: "concat_join",
        slow: "n = int(input())\nout = \"\"\nfor i in range(n):\n    out = out + str(i) + \" \"\n    last = out\nprint(out.strip())\n",
        medium: "n = int(input())\nout = \"\"\nfor i in range(n):\n    out = out + str(i) + \" \"\n    if i % 2 == 0:\n        last = out\nprint(out.strip())\n",
        fast: "n = int(input())\nprint(\" \".join(map(str, range(n))))\n",
        wrong: [
            "n = int(input())\nprint(\" \".join(map(str, range(1, n))))\n",
            "n = int(input())\nprint(\",\".join(map(str, range(n))))\n",
        ],
        crash: "n = int(input())\nprint(\" \".join(range(n)))\n",
        public: &[("1", "30000\n")],
        private: &[("1", "28000\n"), ("2", "32000\n")],
    },
    Toy {
        id: "mod_repeat",
        slow: "a, k, m = map(int, input().split())\nr = 0\nfor _ in range(k):\n    r = (r + a) % m\nprint(r)\n",
        medium: "a, k, m = map(int, input().split())\nr = 0\nstep = 2 * a % m\nfor _ in range(k // 2):\n    r = (r + step) % m\nif k % 2:\n    r = (r + a) % m\nprint(r)\n",
        fast: "a, k, m = map(int, input().split())\nprint(a * k % m)\n",
        wrong: [
            "a, k, m = map(int, input().split())\nprint(a * k)\n",
            "a, k, m = map(int, input().split())\nprint((a + k) % m)\n",
        ],
        crash: "a, k, m = map(int, input().split())\nprint(a * k % (m - m))\n",
        public: &[("1", "123456789 2000000 1000000007\n")],
        private: &[("1", "987654321 1900000 998244353\n"), ("2", "55555 2100001 1000000007\n")],
    },
];

impl Toy {
    fn expected(&self, input: &str) -> String {
        let out = Command::new("python3")
            .arg("-c")
            .arg(self.fast)
            .stdin(std::process::Stdio::piped())
            .stdout(std::process::Stdio::piped())
            .spawn()
            .and_then(|mut child| {
                child.stdin.take().unwrap().write_all(input.as_bytes())?;
                child.wait_with_output()
            })
            .expect("python3 runs");
        String::from_utf8(out.stdout).unwrap()
    }
}

pub fn fenced(code: &str) -> String {
    format!("The loop can be replaced by cheaper operations.\n```python\n{code}```\n")
}

const PROSE: &str = "I could not find a way to make this program faster.";

/// Replies for problem `toy`: the seed round, then generation rounds 1, 2, ...
/// Rounds past the script get prose only.
pub fn replies(toy: &Toy, round: Option<usize>) -> Vec<String> {
    match round {
        None => vec![fenced(toy.medium), fenced(toy.wrong[0]), fenced(toy.crash), PROSE.into()],
        Some(0) => vec![fenced(toy.fast), fenced(toy.wrong[1]), PROSE.into(), PROSE.into()],
        Some(_) => vec![PROSE.into(); 4],
    }
}

/// Writes problems, test suites, a training corpus and a config file.
pub struct ToyWorkspace {
    pub dir: PathBuf,
    pub problems: PathBuf,
    pub corpus: PathBuf,
    pub base: PathBuf,
    pub config: PathBuf,
}

pub fn write_toy_workspace(dir: &Path, toys: &[&Toy], endpoint: Option<&str>) -> ToyWorkspace {
    fs::create_dir_all(dir).unwrap();
    let mut lines = String::new();
    for t in toys {
        let rec = json!({"problem_id": t.id, "language": "python", "slow_code": t.slow, "fast_code": t.fast});
        lines.push_str(&rec.to_string());
        lines.push('\n');
        for (kind, cases) in [("public", t.public), ("private", t.private)] {
            let d = dir.join("tests").join(t.id).join(kind);
            fs::create_dir_all(&d).unwrap();
            for (id, input) in cases {
                fs::write(d.join(format!("{id}.in")), input).unwrap();
                fs::write(d.join(format!("{id}.out")), t.expected(input)).unwrap();
            }
        }
    }
    let problems = dir.join("problems.jsonl");
    fs::write(&problems, lines).unwrap();

    let pairs = [
        ("t1", "n = int(input())\ns = 0\nfor i in range(n):\n    s += i\nprint(s)\n", "n = int(input())\nprint(n * (n - 1) // 2)\n"),
        ("t2", "xs = input().split()\nr = ''\nfor x in xs:\n    r = r + x\nprint(r)\n", "xs = input().split()\nprint(''.join(xs))\n"),
        ("t3", "a, b = map(int, input().split())\nc = 0\nfor _ in range(b):\n    c += a\nprint(c)\n", "a, b = map(int, input().split())\nprint(a * b)\n"),
        ("t4", "n = int(input())\nv = []\nfor i in range(n):\n    v.append(i * i)\nprint(sum(v))\n", "n = int(input())\nprint(sum(i * i for i in range(n)))\n"),
        ("t5", "import sys\nn = int(input())\nfor i in range(n):\n    print(i)\n", "import sys\nn = int(input())\nsys.stdout.write('\\n'.join(map(str, range(n))) + '\\n')\n"),
    ];
    let corpus = dir.join("corpus.jsonl");
    let text: String = pairs
        .iter()
        .map(|(id, s, f)| json!({"problem_id": id, "language": "python", "slow_code": s, "fast_code": f}).to_string() + "\n")
        .collect();
    fs::write(&corpus, text).unwrap();

    let config = dir.join("config.toml");
    let mut cfg = String::from(
        "num_representatives = 3\nmax_iterations = 4\nsamples_per_call = 4\ntemperature = 0.7\nruns_per_measurement = 3\ntimeout_s = 20\nmodel_name = \"mock-model\"\napi_key_env = \"EVOPERF_TEST_KEY\"\nmax_attempts = 2\n",
    );
    if let Some(url) = endpoint {
        cfg.push_str(&format!("endpoint_url = \"{url}\"\n"));
    }
    fs::write(&config, cfg).unwrap();
    ToyWorkspace {
        dir: dir.to_path_buf(),
        problems,
        corpus,
        base: dir.join("base.json"),
        config,
    }
}

/// Local chat-completion endpoint answering from `replies`. The problem is
/// recognised by its slow code inside the prompt; generation rounds are
/// counted per problem.
pub struct MockEndpoint {
    pub url: String,
    pub requests: Arc<Mutex<usize>>,
}

pub fn mock_endpoint() -> MockEndpoint {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(0));
    let counter = Arc::clone(&requests);
    let rounds: Arc<Mutex<HashMap<&'static str, usize>>> = Arc::default();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let mut reader = BufReader::new(stream);
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            if reader.read_exact(&mut buf).is_err() {
                continue;
            }
            *counter.lock().unwrap() += 1;
            let body: Value = serde_json::from_slice(&buf).unwrap_or(Value::Null);
            let user = body["messages"]
                .as_array()
                .and_then(|m| m.last())
                .and_then(|m| m["content"].as_str())
                .unwrap_or("")
                .to_string();
            let n = body["n"].as_u64().unwrap_or(1) as usize;
            let (status, reply) = match TOYS.iter().find(|t| user.contains(t.slow)) {
                Some(t) => {
                    let round = if user.contains("### Representative optimized versions") {
                        let mut r = rounds.lock().unwrap();
                        let k = r.entry(t.id).or_insert(0);
                        *k += 1;
                        Some(*k - 1)
                    } else {
                        None
                    };
                    let choices: Vec<Value> = replies(t, round)
                        .into_iter()
                        .take(n)
                        .map(|c| json!({"message": {"role": "assistant", "content": c}}))
                        .collect();
                    (200, json!({"model": "mock-model", "choices": choices}).to_string())
                }
                None => (400, json!({"error": "unknown problem"}).to_string()),
            };
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    MockEndpoint { url, requests }
}

pub fn evoperf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evoperf"))
        .args(args)
        .env("EVOPERF_TEST_KEY", "test-only-key")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn describe(out: &Output) -> String {
    format!(
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}
