import json
import os
import subprocess

import pytest

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def curated_methods():
    with open(os.path.join(FIXTURES, "curated_methods.json")) as fh:
        return json.load(fh)["methods"]


def git(*args, cwd, env_date=None):
    env = dict(os.environ)
    env.setdefault("GIT_AUTHOR_NAME", "tester")
    env.setdefault("GIT_AUTHOR_EMAIL", "t@example.com")
    env.setdefault("GIT_COMMITTER_NAME", "tester")
    env.setdefault("GIT_COMMITTER_EMAIL", "t@example.com")
    if env_date:
        env["GIT_AUTHOR_DATE"] = env_date
        env["GIT_COMMITTER_DATE"] = env_date
    subprocess.run(["git", *args], cwd=cwd, check=True, env=env,
                   stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


@pytest.fixture()
def fixture_repo(tmp_path):
    """A 3-commit repository: one commit before the window, two inside."""
    repo = tmp_path / "demo-repo"
    repo.mkdir()
    git("init", "-q", cwd=repo)

    # commit 1: before the window
    (repo / "old.py").write_text(
        "def ancient():\n    return 0\n", encoding="utf-8")
    git("add", ".", cwd=repo)
    git("commit", "-q", "-m", "initial drop", cwd=repo,
        env_date="2021-06-01T10:00:00 +0000")

    # commit 2: inside the window, adds two functions in one file
    (repo / "pair.py").write_text(
        "def first(a):\n"
        "    \"\"\"Return the input unchanged for now.\"\"\"\n"
        "    return a\n"
        "\n"
        "def second(b):\n"
        "    return b * 2\n", encoding="utf-8")
    git("add", ".", cwd=repo)
    git("commit", "-q", "-m", "add pair of helpers", cwd=repo,
        env_date="2022-03-05T09:30:00 +0000")

    # commit 3: inside the window, changes one body and one comment only
    (repo / "pair.py").write_text(
        "def first(a):\n"
        "    \"\"\"Return the input unchanged for now.\"\"\"\n"
        "    return a  # identity\n"
        "\n"
        "def second(b):\n"
        "    return b * 2\n", encoding="utf-8")
    git("add", ".", cwd=repo)
    git("commit", "-q", "-m", "comment the identity", cwd=repo,
        env_date="2022-07-15T14:00:00 +0000")

    return str(repo)
