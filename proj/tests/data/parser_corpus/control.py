import logging


def run(items, strict=False):
    result = []
    for item in items:
        if item is None:
            continue
        try:
            value = int(item)
        except ValueError:
            if strict:
                raise
            value = 0
        except (TypeError, AttributeError) as exc:
            logging.warning('bad item %r: %s', item, exc)
            continue
        finally:
            pass
        result.append(value)
    return result


class Thing:
    count = 0

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def fetch(conn, key, default=None):
    with Thing() as t:
        with Thing():
            if key:
                return conn.get(key, default)
    try:
        pass
    finally:
        conn.close()
    while True:
        if not conn.retry():
            break
    return None


def walk(tree):
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.children:
            stack.extend(reversed(node.children))
        elif node.value < 0:
            node.value = -node.value
        elif node.value == 0:
            pass
        else:
            yield node


def defaults(a, b=(1, 2), c={'k': [3]}, d=lambda x: x * 2):
    return d(a), b, c
