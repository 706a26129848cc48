//! Single-producer TCP ingestion service and a matching client.
//!
//! The socket reader and the pipeline run on separate threads joined by a
//! bounded queue, so a slow pipeline pushes back on the producer instead of
//! dropping frames.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::config::Config;
use crate::csi::{decode_frame, encode_frame, CsiFrame};
use crate::error::{Error, Result};
use crate::pipeline::{BpmRow, NightProcessor, NightReport};
use crate::wire::{read_message, write_message, ServerMessage};

/// Frames buffered between the socket reader and the pipeline.
pub const QUEUE_FRAMES: usize = 4096;

/// A bound, not yet running, ingestion server.
pub struct IngestServer {
    listener: TcpListener,
    cfg: Config,
    out_dir: PathBuf,
}

impl IngestServer {
    pub fn bind<A: ToSocketAddrs>(addr: A, cfg: Config, out_dir: impl Into<PathBuf>) -> Result<Self> {
        cfg.validate()?;
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir)?;
        Ok(IngestServer {
            listener: TcpListener::bind(addr)?,
            cfg,
            out_dir,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves until `stop` is set (checked after each accepted connection).
    pub fn serve(self, stop: Arc<AtomicBool>) -> Result<()> {
        let busy = Arc::new(AtomicBool::new(false));
        let mut sessions: Vec<JoinHandle<()>> = Vec::new();
        for stream in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let mut stream = match stream {
                Ok(s) => s,
                Err(_) => continue,
            };
            if busy.swap(true, Ordering::SeqCst) {
                let _ = ServerMessage::Busy.send(&mut stream);
                let _ = stream.shutdown(Shutdown::Both);
                continue;
            }
            let cfg = self.cfg.clone();
            let dir = next_session_dir(&self.out_dir)?;
            let busy = busy.clone();
            sessions.retain(|h| !h.is_finished());
            sessions.push(thread::spawn(move || {
                let _ = run_session(stream, cfg, &dir);
                busy.store(false, Ordering::SeqCst);
            }));
        }
        for h in sessions {
            let _ = h.join();
        }
        Ok(())
    }

    /// Runs the server on a background thread.
    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let join = thread::spawn(move || self.serve(flag));
        Ok(ServerHandle { addr, stop, join })
    }
}

/// Handle to a server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    join: JoinHandle<Result<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, waits for running sessions, and joins the server thread.
    pub fn shutdown(self) -> Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        self.join
            .join()
            .map_err(|_| Error::Protocol("server thread panicked".into()))?
    }
}

fn next_session_dir(out_dir: &Path) -> Result<PathBuf> {
    for i in 1.. {
        let dir = out_dir.join(format!("session-{i:04}"));
        if !dir.exists() {
            fs::create_dir_all(&dir)?;
            return Ok(dir);
        }
    }
    unreachable!()
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn run_pipeline(rx: Receiver<CsiFrame>, cfg: Config, dir: &Path, failed: &AtomicBool) -> Result<NightReport> {
    let mut proc = NightProcessor::new(cfg)?;
    let mut bpm_out = BufWriter::new(File::create(dir.join("bpm.jsonl"))?);
    let mut err = None;
    let mut written = 0usize;
    for frame in rx.iter() {
        if err.is_some() {
            continue;
        }
        match proc.push(frame) {
            Ok(rows) => {
                for r in &rows {
                    serde_json::to_writer(&mut bpm_out, &BpmRow::from(r))?;
                    bpm_out.write_all(b"\n")?;
                }
                written += rows.len();
                if !rows.is_empty() {
                    bpm_out.flush()?;
                }
            }
            Err(e) => {
                failed.store(true, Ordering::SeqCst);
                err = Some(e);
            }
        }
    }
    let report = proc.finish(None)?;
    for r in report.bpm_series.iter().skip(written) {
        serde_json::to_writer(&mut bpm_out, &BpmRow::from(r))?;
        bpm_out.write_all(b"\n")?;
    }
    bpm_out.flush()?;
    write_atomic(&dir.join("report.json"), report.to_json().as_bytes())?;
    match err {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn run_session(stream: TcpStream, cfg: Config, dir: &Path) -> Result<()> {
    let mut writer = stream.try_clone()?;
    ServerMessage::Ready.send(&mut writer)?;
    let (tx, rx) = sync_channel::<CsiFrame>(QUEUE_FRAMES);
    let failed = Arc::new(AtomicBool::new(false));
    let pipeline = {
        let dir = dir.to_path_buf();
        let failed = failed.clone();
        thread::spawn(move || run_pipeline(rx, cfg, &dir, &failed))
    };

    let mut reader = BufReader::new(stream);
    let mut frames = 0usize;
    let mut read_err: Option<Error> = None;
    loop {
        if failed.load(Ordering::SeqCst) {
            break;
        }
        match read_message(&mut reader) {
            Ok(None) => break,
            Ok(Some(body)) => {
                let frame = std::str::from_utf8(&body)
                    .map_err(|e| Error::Parse {
                        line: frames + 1,
                        message: e.to_string(),
                    })
                    .and_then(|s| decode_frame(s, frames + 1));
                match frame {
                    Ok(f) => {
                        frames += 1;
                        if tx.send(f).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        read_err = Some(e);
                        break;
                    }
                }
            }
            Err(e) => {
                read_err = Some(e);
                break;
            }
        }
    }
    drop(tx);
    let result = pipeline
        .join()
        .map_err(|_| Error::Protocol("pipeline thread panicked".into()))?;
    let reply = match (read_err, result) {
        (Some(e), _) | (None, Err(e)) => ServerMessage::Error {
            message: e.to_string(),
        },
        (None, Ok(_)) => ServerMessage::Done {
            report: dir.join("report.json").display().to_string(),
            frames,
        },
    };
    let _ = reply.send(&mut writer);
    let _ = writer.shutdown(Shutdown::Both);
    Ok(())
}

/// An accepted producer connection.
pub struct Producer {
    stream: TcpStream,
    sent: usize,
}

impl Producer {
    /// Connects and waits for the server's verdict; a busy server is an error.
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        let mut stream = TcpStream::connect(addr)?;
        match ServerMessage::recv(&mut stream)? {
            Some(ServerMessage::Ready) => Ok(Producer { stream, sent: 0 }),
            Some(ServerMessage::Busy) => Err(Error::Protocol("server busy".into())),
            other => Err(Error::Protocol(format!("unexpected greeting {other:?}"))),
        }
    }

    pub fn send_frame(&mut self, frame: &CsiFrame) -> Result<()> {
        write_message(&mut self.stream, encode_frame(frame).as_bytes())?;
        self.sent += 1;
        Ok(())
    }

    /// Sends a raw payload as one message.
    pub fn send_raw(&mut self, payload: &[u8]) -> Result<()> {
        write_message(&mut self.stream, payload)
    }

    /// Ends the session and waits for the server's final message.
    pub fn finish(mut self) -> Result<ServerMessage> {
        self.stream.flush()?;
        self.stream.shutdown(Shutdown::Write)?;
        ServerMessage::recv(&mut self.stream)?
            .ok_or_else(|| Error::Protocol("server closed without a final status".into()))
    }
}

/// Streams frames to a server and returns its final status.
pub fn send_frames<A, I>(addr: A, frames: I) -> Result<ServerMessage>
where
    A: ToSocketAddrs,
    I: IntoIterator<Item = CsiFrame>,
{
    let mut p = Producer::connect(addr)?;
    for f in frames {
        p.send_frame(&f)?;
    }
    p.finish()
}
