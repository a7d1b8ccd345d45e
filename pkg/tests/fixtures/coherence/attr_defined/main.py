class Widget:
    def ping(self) -> int:
        return 1


def use(w: Widget) -> int:
    return w.pong()
