"""Prompt templates for the two text datasets.

Context text for the structured styles carries its two fields separated by
a tab: ``preceding<TAB>following`` for entity linking and
``title<TAB>content`` for item tagging.
"""

WIKILINKS_FLAN = "question: {text_preceding} <extra_id_0>. {text_following}"

AMAZON_FLAN = "Title: {title}\nContent: {content}\nTask: Predict the associated label."

AMAZON_GEMMA = (
    "<bos><start_of_turn>user\n"
    "Title: {title}\n"
    "Content: {content}\n"
    "Task: Predict the item tag based on the content and title.<end_of_turn>\n"
    "<start_of_turn>model"
)

AMAZON_CHAT_SYSTEM = "Predict the item tag based on the content and title."
AMAZON_CHAT_USER = "Title: {title}\nContent: {content}"

STYLES = ("plain", "wikilinks", "amazon-flan", "amazon-gemma", "amazon-chat")


def _split(text):
    head, _, tail = text.partition("\t")
    return head.strip(), tail.strip()


def build_prompt(text: str, style: str = "plain") -> str:
    """User-turn prompt for one context; also part of the cache key."""
    if style == "plain":
        return text
    if style == "wikilinks":
        pre, post = _split(text)
        return WIKILINKS_FLAN.format(text_preceding=pre, text_following=post)
    title, content = _split(text)
    if style == "amazon-flan":
        return AMAZON_FLAN.format(title=title, content=content)
    if style == "amazon-gemma":
        return AMAZON_GEMMA.format(title=title, content=content)
    if style == "amazon-chat":
        return AMAZON_CHAT_USER.format(title=title, content=content)
    raise ValueError(f"unknown prompt style {style!r}; expected one of {STYLES}")


def system_prompt(style: str):
    return AMAZON_CHAT_SYSTEM if style == "amazon-chat" else None


def build_messages(prompt: str, system=None):
    messages = [{"role": "system", "content": system}] if system else []
    messages.append({"role": "user", "content": prompt})
    return messages
