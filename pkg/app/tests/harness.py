#!/usr/bin/env python3
"""
Shared runner for the workbench test files.
Every test_*.py is collected by pytest and can also be run as a script, in which
case main() passes its tests through run_suite for a readable summary.
"""

import subprocess
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

PROJECT_ROOT = Path(__file__).resolve().parents[2]


def run_command(cmd: List[str], cwd: Optional[Path] = None, env: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """Run a command and return the result"""
    try:
        result = subprocess.run(
            cmd,
            capture_output=True,
            text=True,
            cwd=cwd or PROJECT_ROOT,
            env=env,
        )
        return {
            "success": result.returncode == 0,
            "stdout": result.stdout.strip(),
            "stderr": result.stderr.strip(),
            "returncode": result.returncode
        }
    except Exception as e:
        return {
            "success": False,
            "stdout": "",
            "stderr": str(e),
            "returncode": -1
        }


def run_suite(title: str, tests: Sequence[Tuple[str, Callable[[], None]]]) -> bool:
    """Run tests in order, print one line per test and a summary"""
    print(f"🚀 {title}")
    print("=" * 50)

    results = []
    for test_name, test_func in tests:
        print(f"\n🧪 {test_name}...")
        try:
            test_func()
            print(f"✅ {test_name}")
            results.append((test_name, True))
        except AssertionError as e:
            print(f"❌ {test_name}: {e}")
            results.append((test_name, False))
        except Exception as e:
            print(f"❌ {test_name} failed with exception: {type(e).__name__}: {e}")
            results.append((test_name, False))

    print("\n" + "=" * 50)
    print("📊 Test Results Summary")
    print("=" * 50)

    passed = 0
    for test_name, success in results:
        status = "✅ PASS" if success else "❌ FAIL"
        print(f"{status}: {test_name}")
        if success:
            passed += 1

    print(f"\nOverall: {passed}/{len(results)} tests passed")
    if passed == len(results):
        print("\n🎉 All tests passed!")
        return True
    print(f"\n⚠️  {len(results) - passed} test(s) failed. Please review the output above.")
    return False


def exit_with(success: bool) -> None:
    sys.exit(0 if success else 1)
