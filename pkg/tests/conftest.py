"""Shared fixture builders: byte-exact WARC records and synthetic corpora."""

from __future__ import annotations

import random

import pytest

# --- WARC construction (assembled by hand from the record grammar) -----------


def build_warc_record(
    record_type: str,
    payload: bytes,
    target_uri: str = "",
    warc_date: str = "2024-01-01T00:00:00Z",
    content_type: str = "text/plain",
    extra_headers: dict[str, str] | None = None,
    omit_headers: tuple[str, ...] = (),
) -> bytes:
    headers = [("WARC-Type", record_type)]
    if target_uri:
        headers.append(("WARC-Target-URI", target_uri))
    headers += [
        ("WARC-Date", warc_date),
        ("WARC-Record-ID", f"<urn:uuid:{abs(hash((record_type, target_uri, warc_date)))}>"),
        ("Content-Type", content_type),
        ("Content-Length", str(len(payload))),
    ]
    if extra_headers:
        headers += list(extra_headers.items())
    lines = [b"WARC/1.0\r\n"]
    for name, value in headers:
        if name in omit_headers:
            continue
        lines.append(f"{name}: {value}\r\n".encode("utf-8"))
    lines.append(b"\r\n")
    lines.append(payload)
    lines.append(b"\r\n\r\n")
    return b"".join(lines)


def build_http_response(body: bytes, content_type: str = "text/html; charset=utf-8") -> bytes:
    head = (
        b"HTTP/1.1 200 OK\r\n"
        b"Content-Type: " + content_type.encode("ascii") + b"\r\n"
        b"Content-Length: " + str(len(body)).encode("ascii") + b"\r\n"
        b"\r\n"
    )
    return head + body


# --- synthetic language corpora ----------------------------------------------

ARABIC_WORDS = (
    "المملكة العربية السعودية الرياض جدة مكة المدينة التعليم الجامعة الطلاب "
    "المدرسة الكتاب القراءة العلوم التاريخ الجغرافيا الاقتصاد التجارة السوق "
    "الحكومة الوزارة القرار القانون المجلس الانتخابات الصحة المستشفى الطبيب "
    "العلاج الدواء الرياضة الفريق المباراة البطولة اللاعب التدريب الثقافة "
    "الفن المسرح السينما الموسيقى الشعر الأدب الرواية القصة الصحيفة الأخبار "
    "التقرير المراسل البرنامج التلفزيون الإذاعة التقنية الحاسوب الإنترنت "
    "الهاتف التطبيق البيانات الذكاء البحث التطوير الصناعة الزراعة المياه "
    "الطاقة النفط الغاز الكهرباء البيئة المناخ الطقس الحرارة الأمطار البحر "
    "الجبل الصحراء المدينة القرية الشارع البيت العائلة الأطفال الوالدان "
    "الصداقة العمل الوظيفة الراتب الشركة المشروع الاجتماع السفر الطائرة "
    "السيارة القطار الفندق المطعم الطعام الخبز الأرز اللحم الفواكه الخضار "
    "القهوة الشاي الصباح المساء الليل النهار الأسبوع الشهر السنة الوقت"
).split()

ARABIC_STOPWORDS = (
    "في من على إلى عن أن إن كان مع هذا هذه ذلك التي الذي ما لا لم لن قد كل "
    "بعد قبل عند حتى إذا ثم أو بين كما لكن"
).split()

ENGLISH_WORDS = (
    "the government announced a new education policy for schools and "
    "universities students will receive modern textbooks teachers attended "
    "training sessions during summer the economy grew faster than expected "
    "markets responded with optimism company profits increased while "
    "unemployment fell researchers published findings about climate change "
    "ocean temperatures continue rising scientists urge immediate action "
    "football season started with exciting matches local team won the "
    "championship fans celebrated throughout the night museums opened new "
    "exhibitions featuring contemporary art visitors praised the collection "
    "hospital staff received awards for excellent patient care doctors "
    "recommend regular exercise healthy food and enough sleep technology "
    "companies released updated software versions users reported better "
    "performance travel restrictions eased airlines added routes hotels "
    "offered discounts restaurants served seasonal dishes coffee remains "
    "popular among young people morning newspapers covered election results"
).split()

FRENCH_WORDS = (
    "le gouvernement a annoncé une nouvelle politique éducative pour les "
    "écoles et universités les étudiants recevront des manuels modernes les "
    "enseignants ont suivi des formations pendant été économie a progressé "
    "plus vite que prévu les marchés ont réagi avec optimisme les bénéfices "
    "des entreprises ont augmenté tandis que le chômage baissait des "
    "chercheurs ont publié des résultats sur le changement climatique la "
    "température des océans continue de monter les scientifiques demandent "
    "une action immédiate la saison de football a commencé avec des matchs "
    "passionnants équipe locale a remporté le championnat les supporters ont "
    "célébré toute la nuit les musées ont ouvert de nouvelles expositions "
    "art contemporain les visiteurs ont salué la collection le personnel de "
    "hôpital a reçu des prix pour les soins aux patients les médecins "
    "recommandent exercice régulier une alimentation saine et assez de "
    "sommeil les entreprises technologiques ont publié des logiciels mis à "
    "jour les utilisateurs signalent de meilleures performances"
).split()


def make_sentence(rng: random.Random, words: list[str], stopwords: list[str] | None = None,
                  n_words: tuple[int, int] = (6, 14), terminal: str = ".") -> str:
    n = rng.randint(*n_words)
    tokens = [rng.choice(words) for _ in range(n)]
    if stopwords:
        for _ in range(max(1, n // 4)):
            tokens[rng.randrange(len(tokens))] = rng.choice(stopwords)
    return " ".join(tokens) + terminal


def make_corpus(language: str, n_sentences: int, seed: int) -> list[str]:
    rng = random.Random((language, seed))
    pools = {
        "ar": (list(ARABIC_WORDS), list(ARABIC_STOPWORDS)),
        "en": (list(ENGLISH_WORDS), None),
        "fr": (list(FRENCH_WORDS), None),
    }
    words, stopwords = pools[language]
    return [make_sentence(rng, words, stopwords) for _ in range(n_sentences)]


def make_arabic_article(rng: random.Random, n_lines: int = 6,
                        words_per_line: tuple[int, int] = (8, 14)) -> str:
    """An article that passes every heuristic filter: multi-word lines with
    terminal punctuation, stopword hits, and a varied vocabulary."""
    lines = []
    for _ in range(n_lines):
        lines.append(
            make_sentence(rng, ARABIC_WORDS, ARABIC_STOPWORDS, n_words=words_per_line)
        )
    return "\n".join(lines)


@pytest.fixture
def rng():
    return random.Random(20240801)


@pytest.fixture(scope="session")
def seed_langid_model():
    from arcorpus.langid import train_langid

    corpora = {lang: make_corpus(lang, 1000, seed=11) for lang in ("ar", "en", "fr")}
    return train_langid(corpora, order=3)
