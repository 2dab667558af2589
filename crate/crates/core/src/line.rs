//! Bounded `\n`-delimited line reading over async byte streams.

use tokio::io::{AsyncBufRead, AsyncBufReadExt, AsyncReadExt};

/// Longest accepted line, terminator included.
pub const MAX_LINE_BYTES: usize = 64 * 1024;

#[derive(Debug)]
pub(crate) enum LineError {
    TooLong,
    Io(std::io::Error),
}

/// Next line without its `\n` (and a preceding `\r`, if any); `None` at EOF.
/// A partial last line before EOF counts as EOF.
///
/// Not cancel-safe: partially read data is lost if the future is dropped.
pub(crate) async fn read_line<'b, R>(reader: &mut R, buf: &'b mut Vec<u8>) -> Result<Option<&'b [u8]>, LineError>
where
    R: AsyncBufRead + Unpin,
{
    buf.clear();
    let limit = MAX_LINE_BYTES as u64;
    let n = (&mut *reader).take(limit).read_until(b'\n', buf).await.map_err(LineError::Io)?;
    if n == 0 || buf.last() != Some(&b'\n') {
        return if n as u64 >= limit { Err(LineError::TooLong) } else { Ok(None) };
    }
    buf.pop();
    if buf.last() == Some(&b'\r') {
        buf.pop();
    }
    Ok(Some(&buf[..]))
}
