import pytest

from enrichevent.core import Tweet

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def make_tweet():
    counter = iter(range(10**6))

    def factory(text, timestamp=0, user="u0", retweets=0, hashtags=None, tid=None):
        return Tweet(
            id=tid or f"t{next(counter)}",
            timestamp=timestamp,
            text=text,
            user_id=user,
            retweet_count=retweets,
            hashtags=tuple(hashtags or ()),
        )

    return factory
