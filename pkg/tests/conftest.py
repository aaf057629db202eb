from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np
import pytest

HEADER = ('<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/" version="0.10" xml:lang="ro">\n'
          "  <siteinfo><sitename>Test</sitename><dbname>testwiki</dbname></siteinfo>\n")


def revision(ts: str, user: str | None = None, uid: int | None = None, ip: str | None = None,
             text: str = "body", minor: bool = False, rev_id: int = 1) -> str:
    if ip is not None:
        who = f"<ip>{escape(ip)}</ip>"
    else:
        who = (f"<username>{escape(user)}</username>" if user else "") + (f"<id>{uid}</id>" if uid is not None else "")
    return (f"    <revision>\n      <id>{rev_id}</id>\n      <timestamp>{ts}</timestamp>\n"
            f"      <contributor>{who}</contributor>\n" + ("      <minor/>\n" if minor else "")
            + f'      <model>wikitext</model>\n      <text xml:space="preserve" bytes="{len(text)}">{escape(text)}</text>\n'
            "    </revision>\n")


def page(page_id: int, revisions: list[str], ns: int = 0, title: str | None = None) -> str:
    title = title or f"Page {page_id}"
    return (f"  <page>\n    <title>{escape(title)}</title>\n    <ns>{ns}</ns>\n    <id>{page_id}</id>\n"
            + "".join(revisions) + "  </page>\n")


def dump(pages: list[str]) -> bytes:
    return (HEADER + "".join(pages) + "</mediawiki>\n").encode("utf-8")


def monthly_revisions(user: str, uid: int, months: dict[tuple[int, int], int]) -> list[str]:
    """``n`` revisions on distinct days of each (year, month)."""
    out = []
    for (y, m), n in sorted(months.items()):
        for i in range(n):
            day = 1 + i % 28
            out.append(revision(f"{y:04d}-{m:02d}-{day:02d}T{i % 24:02d}:{i % 60:02d}:00Z", user, uid))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
