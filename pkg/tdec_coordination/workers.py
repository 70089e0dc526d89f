# tdec_coordination/workers.py
"""
Fan-out of independent work items (segments, matrices, CV folds)
over a thread pool. Results come back in input order so artifacts do
not depend on the worker count.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed


def map_ordered(fn, items, max_workers=1):
    items = list(items)
    if max_workers is None or max_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    results = [None] * len(items)
    errors = {}
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(fn, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            i = futures[future]
            try:
                results[i] = future.result()
            except Exception as e:
                errors[i] = e
    if errors:
        # same error as a sequential run would raise
        raise errors[min(errors)]
    return results
