from hide_adapter.tokenizer import VOCAB_SIZE, content_words, token_id, tokenize


def test_tokenize_lowercases_and_splits():
    assert tokenize("What COLOR is the Umbrella?") == ["what", "color", "is", "the", "umbrella"]


def test_token_id_stable_and_bounded():
    assert token_id("umbrella") == token_id("umbrella")
    for word in ("a", "dog", "umbrella", "zebra"):
        assert 0 <= token_id(word) < VOCAB_SIZE


def test_content_words_drop_stopwords():
    words = content_words("what color is the umbrella")
    assert "umbrella" in words
    assert "the" not in words and "is" not in words


def test_content_words_deduplicate_preserving_order():
    assert content_words("the dog and the dog and the cat") == ["dog", "cat"]


def test_multi_object_question_yields_multiple():
    words = content_words("is the red ball left of the blue chair")
    assert len(words) >= 2
    assert "ball" in words and "chair" in words
