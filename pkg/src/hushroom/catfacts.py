"""A bundled list of cat facts, rotated through keygen progress events so
the wait for fresh DSA parameters feels shorter than it is."""

CAT_FACTS = (
    "A group of kittens is called a kindle.",
    "Cats spend roughly two thirds of their lives asleep.",
    "A cat's nose print is unique, much like a human fingerprint.",
    "Cats can rotate their ears 180 degrees.",
    "The first cat video was filmed by Thomas Edison in 1894.",
    "Adult cats only meow to communicate with humans, not other cats.",
    "A cat can jump up to six times its own length.",
    "Cats have five toes on their front paws but only four on the back.",
    "A cat's purr vibrates at a frequency thought to promote bone healing.",
    "Isaac Newton is often credited with inventing the cat flap.",
    "Cats walk like camels and giraffes: both right feet, then both left.",
    "A cat's whiskers are roughly as wide as its body.",
    "Most cats are lactose intolerant despite the saucer-of-milk cliche.",
    "The oldest known pet cat was buried 9,500 years ago in Cyprus.",
    "Cats can drink seawater; their kidneys filter out the salt.",
    "A house cat shares about 95.6 percent of its genome with tigers.",
    "Cats sweat only through their paw pads.",
    "A cat's heart beats nearly twice as fast as a human's.",
    "Felicette, the first cat in space, flew on a French rocket in 1963.",
    "Cats have a third eyelid called the haw.",
    "An adult cat has 30 teeth; kittens have 26.",
    "Cats cannot taste sweetness.",
    "A cat's tail contains nearly 10 percent of its bones.",
    "Cats knead with their paws when they feel content.",
    "The Egyptian word for cat was 'miu'.",
    "A cat ran for mayor of Mexico City in 2013.",
    "Cats can make over 100 distinct vocal sounds; dogs make about 10.",
    "The richest cat on record inherited 7 million pounds.",
    "Whiskers help a cat judge whether it can fit through a gap.",
    "Cats bring home prey to teach their humans how to hunt.",
    "A cat's collarbone is not attached to its skeleton.",
    "Black cats are considered good luck in Japan and Britain.",
    "Cats use their tails for balance when walking on narrow ledges.",
    "The slow blink is how cats smile at creatures they trust.",
    "A cat's field of view is about 200 degrees.",
    "Cats prefer their food at mouse body temperature.",
    "Some cats are allergic to humans.",
    "A cat called Stubbs was honorary mayor of Talkeetna, Alaska, for 20 years.",
    "Cats can squeeze through any opening as wide as their skull.",
    "The technical term for a hairball is a bezoar.",
    "Cats groom other cats they consider family; it is called allogrooming.",
    "A cat's back is extraordinarily flexible thanks to 53 loosely fitting vertebrae.",
    "Ancient sailors kept cats aboard for luck and rodent control.",
    "Cats chirp at birds they cannot reach.",
    "A cat's brain structure is closer to a human's than a dog's is.",
    "Kittens sleep so much because growth hormone releases during sleep.",
    "Cats can run about 48 kilometres per hour in short bursts.",
    "The world's longest domestic cat measured 123 centimetres.",
    "Cats land on their feet thanks to a righting reflex that develops by seven weeks.",
    "A cat piano, or Katzenklavier, was proposed in the 1650s; no cats were harmed.",
    "Cats have scent glands on their cheeks and mark trusted objects by rubbing.",
    "Outdoor cats live far shorter lives than indoor cats on average.",
    "A clowder is a group of adult cats.",
    "Cats dream during REM sleep, twitching their whiskers and paws.",
    "The loudest recorded purr measured 67.8 decibels.",
    "Cats can remember a problem-solving trick for up to 10 minutes in lab tests.",
)

assert len(CAT_FACTS) >= 50


def fact(index: int) -> str:
    """Deterministic rotation through the list."""
    return CAT_FACTS[index % len(CAT_FACTS)]
