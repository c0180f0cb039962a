from datetime import datetime
import logging
import pandas as pd
from pathlib import Path
import re
import traceback
from types import TracebackType

LOG_LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
    'CRITICAL': logging.CRITICAL
}

LOG_FORMAT = r'%(asctime)s|%(levelname)s|%(module)s|%(lineno)d|%(message)s'

class UsageError(ValueError):
    '''
    Raised for invalid caller input: mismatched dimensions, invalid index or generator parameters,
    malformed transforms, unreadable dataset files. The CLI maps it to exit code 2.
    '''

class VerificationFailure(AssertionError):
    '''
    Raised when a hard assertion of a verification suite fails. The CLI maps it to exit code 3.
    '''

def basic_file_logger(file_path: str | Path = 'main_info.log', log_level: str = 'INFO') -> logging.Logger:
    '''
    * Logs to a file using the specified logging level.
    * Information categories will be pipe-delimited, for reading into a dataframe (see summarize_log()).
    * Logger is given name = __name__, so every module of the project shares it.
    * If logger with name = __name__ already has handlers, it will be returned as-is.

    Args:
        * file_path (str | Path, optional) -- Path to the log file. Defaults to 'main_info.log' in the working directory.
        * log_level (str, optional) -- The logging level as a string (default is 'INFO').

    Returns:
        * Logger -- The configured logger.
    '''
    logger = logging.getLogger(__name__)

    if not logger.handlers:
        level = LOG_LEVELS.get(log_level.upper(), logging.INFO)

        logger.setLevel(level)

        file_handler = logging.FileHandler(file_path, errors='backslashreplace')
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))

        logger.addHandler(file_handler)

    return logger

def project_logger() -> logging.Logger:
    '''
    Logger used by library modules. Handlers are attached by the entry point through basic_file_logger();
    until then records propagate to the root logger and are dropped or shown per its configuration.
    '''
    return logging.getLogger(__name__)

def close_file_logger() -> None:
    '''
    Detach and close the handlers attached by basic_file_logger(), so a later call can target a different file.
    '''
    logger = logging.getLogger(__name__)
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)

def format_logged_exception(exc_type: type[BaseException], exc_val: BaseException, exc_tb: TracebackType, max_chars: int = 2000) -> str:
    '''
    * Formats standard exception information made available inside of an Except block.
    * Flattens the traceback onto a single line: new lines become ' / ', pipe characters become '/',
      '^' and '~' markers are removed and long whitespace is replaced with a single space.
    * Truncates returned string according to max_chars argument.

    Args:
        * exc_type (type[BaseException]) -- Exception type.
        * exc_val (BaseException) -- Exception value.
        * exc_tb (TracebackType) -- Traceback.
        * max_chars (int, optional) -- maximum character count of returned string. Defaults to 2000.

    Returns:
        * str -- Formatted exception information, safe to write into a pipe-delimited log record.
    '''
    exc_format_str = ''.join(traceback.format_exception(exc_type, exc_val, exc_tb))
    exc_format_str = exc_format_str.replace('\n', ' / ').replace('|', '/').replace('^', '').replace('~', '')
    exc_format_str = re.sub(r'\s+', ' ', exc_format_str).strip()
    return exc_format_str if len(exc_format_str) < max_chars else f'{exc_format_str[:max_chars]}...'

def summarize_log(file_path: str | Path, check_level: str = 'WARNING', previous_hours: float | None = None) -> pd.DataFrame:
    '''
    Reads a log file written by basic_file_logger() and returns the records at or above a logging level,
    newest first.

    Args:
        * file_path (str | Path) -- Path to the log file.
        * check_level (str, optional) -- Lowest logging level to include. Defaults to 'WARNING'.
        * previous_hours (float | None, optional) -- Only keep records this many hours old or newer. Defaults to None (keep all).

    Raises:
        * UsageError -- Log file does not exist.

    Returns:
        * pd.DataFrame -- Columns: asctime, levelname, module, lineno, message.
    '''
    file_path = Path(file_path)
    if not file_path.exists():
        raise UsageError(f'{file_path} not found.')

    columns = ['asctime', 'levelname', 'module', 'lineno', 'message']
    if file_path.stat().st_size == 0:
        return pd.DataFrame(columns=columns)

    # split at most four times, the message keeps any later pipes
    rows = []
    with open(file_path, 'r', errors='backslashreplace') as file:
        for line in file:
            parts = line.rstrip('\n').split('|', 4)
            if len(parts) == 5:
                rows.append(parts)
    log_df = pd.DataFrame(rows, columns=columns)

    threshold = LOG_LEVELS.get(check_level.upper(), logging.WARNING)
    log_df = log_df[log_df['levelname'].map(lambda name: LOG_LEVELS.get(name, 0) >= threshold)].copy()

    log_df['log_datetime'] = pd.to_datetime(log_df['asctime'], format='%Y-%m-%d %H:%M:%S,%f')
    if previous_hours is not None:
        cutoff = pd.Timestamp(datetime.now()) - pd.Timedelta(hours=previous_hours)
        log_df = log_df[log_df['log_datetime'] >= cutoff]

    log_df = log_df.sort_values('log_datetime', ascending=False).drop(columns='log_datetime')

    return log_df.reset_index(drop=True)
