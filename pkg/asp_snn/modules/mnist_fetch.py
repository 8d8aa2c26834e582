import gzip
import logging
from pathlib import Path
from typing import List, Union
from urllib.parse import urljoin, urlparse

import backoff
import requests

from ..defaults import Defaults
from ..exceptions import DatasetDownloadError
from .utils import backoff_handler_generic

logger = logging.getLogger(__name__)


@backoff.on_exception(
    backoff.expo,
    exception=(requests.ConnectionError,
               requests.Timeout,
               ConnectionError),
    max_tries=Defaults.DEFAULT_MAX_RETRIES,
    max_time=Defaults.DEFAULT_MAX_TIME,
    on_backoff=backoff_handler_generic)
def download_bytes(url: str, session: requests.Session, timeout: int = Defaults.DEFAULT_REQ_TIMEOUT) -> bytes:
    response = session.get(url, timeout=timeout)
    response.raise_for_status()
    return response.content


def fetch_mnist(dest_dir: Union[str, Path], base_url: str = Defaults.MNIST_BASE_URL,
                timeout: int = Defaults.DEFAULT_REQ_TIMEOUT) -> List[Path]:
    """
    Download and decompress the four MNIST IDX files.

    Args:
        dest_dir: Directory receiving the decompressed files
        base_url: Mirror holding `<name>.gz` for every file in Defaults.MNIST_FILES
        timeout: Per-request timeout in seconds

    Returns:
        Paths of the IDX files, in Defaults.MNIST_FILES order

    Raises:
        DatasetDownloadError: If a file cannot be downloaded or decompressed
    """
    parsed = urlparse(base_url)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        raise DatasetDownloadError(f"Invalid mirror URL: {base_url}")
    if not base_url.endswith("/"):
        base_url += "/"

    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    with requests.Session() as session:
        for name in Defaults.MNIST_FILES:
            target = dest / name
            written.append(target)
            if target.exists():
                logger.info(f"{target} already present, skipping")
                continue
            url = urljoin(base_url, f"{name}.gz")
            try:
                payload = gzip.decompress(download_bytes(url, session, timeout))
            except requests.exceptions.RequestException as e:
                error_message = f"Download failed for {url}: {str(e)}"
                logger.error(error_message)
                raise DatasetDownloadError(error_message)
            except OSError as e:
                error_message = f"Could not decompress {url}: {str(e)}"
                logger.error(error_message)
                raise DatasetDownloadError(error_message)
            target.write_bytes(payload)
            logger.info(f"Wrote {target} ({len(payload)} bytes)")
    return written
